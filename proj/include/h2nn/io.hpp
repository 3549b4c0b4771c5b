// On-disk formats: JSON manifests next to flat little-endian binary blocks
// of 64-bit floats. Every writer is deterministic byte for byte given the
// same content, so reruns of a seeded pipeline can be diffed directly.
#pragma once

#include "dataset.hpp"
#include "model.hpp"
#include "trainer.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace h2nn {

static_assert(std::endian::native == std::endian::little,
              "binary blocks are written in host order and documented as little-endian");

namespace detail {

inline void write_block(std::ostream& os, const Eigen::MatrixXd& m) {
    os.write(reinterpret_cast<const char*>(m.data()),
             std::streamsize(sizeof(double)) * m.size());
}

inline void read_block(std::istream& is, Eigen::MatrixXd& m) {
    is.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(double)) * m.size());
    if (!is)
        throw std::runtime_error("binary block truncated while reading " +
                                 std::to_string(m.size()) + " doubles");
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = {}) {
    std::ofstream os(path, mode | std::ios::trunc);
    if (!os)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = {}) {
    std::ifstream is(path, mode);
    if (!is)
        throw std::runtime_error("cannot open '" + path + "' for reading");
    return is;
}

inline nlohmann::json load_manifest(const std::string& path, const std::string& format) {
    nlohmann::json j = nlohmann::json::parse(detail::open_in(path));
    if (j.value("format", "") != format)
        throw std::runtime_error("'" + path + "' is not a " + format + " file");
    return j;
}

} // namespace detail

// ---- skeleton ----

inline nlohmann::json skeleton_to_json(const H2Skeleton& s) {
    auto pairs_json = [](const BlockPairTemplate& t) {
        nlohmann::json out = nlohmann::json::array();
        for (auto& [i, j] : t.pairs)
            out.push_back({i, j});
        return out;
    };
    nlohmann::json j;
    j["format"] = "h2nn-skeleton";
    j["version"] = 1;
    j["n"] = s.n;
    j["dim"] = s.dim;
    j["eta"] = s.eta;
    j["levels"] = s.levels;
    j["leaf_block"] = s.leaf_block;
    j["separation"] = s.separation;
    j["ranks"] = s.ranks;
    j["close"] = pairs_json(s.close_template);
    nlohmann::json inter = nlohmann::json::array();
    for (const auto& t : s.interaction)
        inter.push_back(pairs_json(t));
    j["interaction"] = inter;
    return j;
}

inline H2Skeleton skeleton_from_json(const nlohmann::json& j) {
    H2Skeleton s;
    s.n = j.at("n").get<int>();
    s.dim = j.at("dim").get<int>();
    s.eta = j.at("eta").get<int>();
    s.levels = j.at("levels").get<int>();
    s.leaf_block = j.at("leaf_block").get<int>();
    s.separation = j.at("separation").get<double>();
    s.ranks = j.at("ranks").get<std::vector<int>>();

    auto pairs_from = [](const nlohmann::json& arr) {
        std::vector<std::pair<int, int>> out;
        for (const auto& p : arr)
            out.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
        return out;
    };
    s.close_template.level = s.levels;
    s.close_template.pairs = pairs_from(j.at("close"));
    s.close_template.row_sizes.assign(std::size_t(s.boxes_at(s.levels)), s.leaf_block);
    s.close_template.col_sizes = s.close_template.row_sizes;
    const auto& inter = j.at("interaction");
    if (int(inter.size()) != s.levels)
        throw std::runtime_error("skeleton manifest: expected one interaction list per level");
    for (int l = 1; l <= s.levels; ++l) {
        BlockPairTemplate t;
        t.level = l;
        t.pairs = pairs_from(inter[l - 1]);
        t.row_sizes.assign(std::size_t(s.boxes_at(l)), s.rank_at(l));
        t.col_sizes = t.row_sizes;
        s.interaction.push_back(std::move(t));
    }
    s.validate();
    return s;
}

inline void save_skeleton(const H2Skeleton& s, const std::string& path) {
    detail::open_out(path) << skeleton_to_json(s).dump(2) << '\n';
}

inline H2Skeleton load_skeleton(const std::string& path) {
    return skeleton_from_json(detail::load_manifest(path, "h2nn-skeleton"));
}

// ---- dataset: <prefix>.json + <prefix>.bin (inputs block, targets block) ----

inline void save_dataset(const Dataset& ds, const std::string& prefix) {
    nlohmann::json j;
    j["format"] = "h2nn-dataset";
    j["version"] = 1;
    j["kernel"] = kernel_name(ds.kernel);
    j["n"] = ds.n;
    j["samples"] = ds.sample_count();
    j["seed"] = ds.seed;
    j["data_file"] = prefix.substr(prefix.find_last_of('/') + 1) + ".bin";
    j["layout"] = "column-major doubles, inputs then targets";
    detail::open_out(prefix + ".json") << j.dump(2) << '\n';

    auto os = detail::open_out(prefix + ".bin", std::ios::binary);
    detail::write_block(os, ds.inputs);
    detail::write_block(os, ds.targets);
}

inline Dataset load_dataset(const std::string& prefix) {
    nlohmann::json j = detail::load_manifest(prefix + ".json", "h2nn-dataset");
    Dataset ds;
    ds.kernel = kernel_from_name(j.at("kernel").get<std::string>());
    ds.n = j.at("n").get<int>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    const int samples = j.at("samples").get<int>();
    if (ds.n < 1 || samples < 1)
        throw std::runtime_error("dataset manifest: bad n or sample count");
    ds.inputs.resize(ds.n, samples);
    ds.targets.resize(ds.n, samples);
    auto is = detail::open_in(prefix + ".bin", std::ios::binary);
    detail::read_block(is, ds.inputs);
    detail::read_block(is, ds.targets);
    return ds;
}

// ---- checkpoints: <prefix>.json + <prefix>.bin (parameter blocks in order) ----

inline void save_checkpoint(H2Network& net, const std::string& prefix) {
    nlohmann::json j;
    j["format"] = "h2nn-checkpoint";
    j["version"] = 1;
    j["model"] = "h2nn";
    j["zeta"] = net.zeta();
    j["output_scale"] = net.output_scale();
    j["parameter_count"] = net.parameter_count();
    j["skeleton"] = skeleton_to_json(net.skeleton());
    detail::open_out(prefix + ".json") << j.dump(2) << '\n';

    auto os = detail::open_out(prefix + ".bin", std::ios::binary);
    for (const Eigen::MatrixXd* w : net.parameters())
        detail::write_block(os, *w);
}

inline void save_checkpoint(ConvBaseline& net, const std::string& prefix) {
    nlohmann::json j;
    j["format"] = "h2nn-checkpoint";
    j["version"] = 1;
    j["model"] = "conv";
    j["n"] = net.size();
    j["layers"] = net.layer_count();
    j["channels"] = net.channels();
    j["kernel"] = net.kernel_width();
    j["output_scale"] = net.output_scale();
    j["parameter_count"] = net.parameter_count();
    detail::open_out(prefix + ".json") << j.dump(2) << '\n';

    auto os = detail::open_out(prefix + ".bin", std::ios::binary);
    for (const Eigen::MatrixXd* w : net.parameters())
        detail::write_block(os, *w);
}

inline std::string checkpoint_model_kind(const std::string& prefix) {
    return detail::load_manifest(prefix + ".json", "h2nn-checkpoint").at("model").get<std::string>();
}

namespace detail {

template <class Model>
void load_parameters(Model& net, const std::string& prefix) {
    auto is = open_in(prefix + ".bin", std::ios::binary);
    for (Eigen::MatrixXd* w : net.parameters())
        read_block(is, *w);
    char extra;
    if (is.read(&extra, 1))
        throw std::runtime_error("'" + prefix + ".bin' holds more data than the model has parameters");
}

} // namespace detail

inline H2Network load_h2nn_checkpoint(const std::string& prefix) {
    nlohmann::json j = detail::load_manifest(prefix + ".json", "h2nn-checkpoint");
    if (j.at("model") != "h2nn")
        throw std::runtime_error("'" + prefix + "' is a " + j.at("model").get<std::string>() +
                                 " checkpoint, not h2nn");
    Rng rng(0); // initialization is overwritten by the stored parameters
    H2Network net(skeleton_from_json(j.at("skeleton")), j.at("zeta").get<int>(), rng);
    net.set_output_scale(j.value("output_scale", 1.0));
    detail::load_parameters(net, prefix);
    return net;
}

inline ConvBaseline load_conv_checkpoint(const std::string& prefix) {
    nlohmann::json j = detail::load_manifest(prefix + ".json", "h2nn-checkpoint");
    if (j.at("model") != "conv")
        throw std::runtime_error("'" + prefix + "' is a " + j.at("model").get<std::string>() +
                                 " checkpoint, not conv");
    Rng rng(0);
    ConvBaseline net(j.at("n").get<int>(), rng, j.at("layers").get<int>(),
                     j.at("channels").get<int>(), j.at("kernel").get<int>());
    net.set_output_scale(j.value("output_scale", 1.0));
    detail::load_parameters(net, prefix);
    return net;
}

// ---- metric logs ----
// metrics.csv carries only seed-determined columns; wall times go to a
// separate file so deterministic outputs stay byte-comparable across reruns

inline void write_metrics_csv(const std::vector<MetricsRow>& log, const std::string& path) {
    auto os = detail::open_out(path);
    os << "iteration,train_loss,train_residual,val_residual\n";
    char line[160];
    for (const MetricsRow& r : log) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", r.iteration, r.train_loss,
                      r.train_residual, r.val_residual);
        os << line;
    }
}

inline void write_timing_csv(const std::vector<MetricsRow>& log, const std::string& path) {
    auto os = detail::open_out(path);
    os << "iteration,seconds\n";
    char line[80];
    for (const MetricsRow& r : log) {
        std::snprintf(line, sizeof line, "%d,%.6f\n", r.iteration, r.seconds);
        os << line;
    }
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    auto is = detail::open_in(path);
    std::string line;
    if (!std::getline(is, line) || line != "iteration,train_loss,train_residual,val_residual")
        throw std::runtime_error("'" + path + "' is not a metrics CSV");
    std::vector<MetricsRow> log;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        MetricsRow r;
        if (std::sscanf(line.c_str(), "%d,%lg,%lg,%lg", &r.iteration, &r.train_loss,
                        &r.train_residual, &r.val_residual) != 4)
            throw std::runtime_error("'" + path + "' has a malformed row: " + line);
        log.push_back(r);
    }
    return log;
}

// ---- model summaries ----

inline nlohmann::json model_summary(H2Network& net) {
    const H2Skeleton& s = net.skeleton();
    nlohmann::json j;
    j["model"] = "h2nn";
    j["n"] = s.n;
    j["levels"] = s.levels;
    j["zeta"] = net.zeta();
    j["min_active_level"] = net.min_level();
    j["output_scale"] = net.output_scale();
    j["parameter_count"] = net.parameter_count();
    j["close"] = {{"pairs", s.close_template.pair_count()},
                  {"parameters", std::int64_t(net.zeta()) * s.close_template.entry_count()}};
    nlohmann::json branches = nlohmann::json::array();
    for (int l = net.min_level(); l <= s.levels; ++l) {
        std::int64_t transfer = 2 * std::int64_t(s.boxes_at(l)) * s.rank_at(l) * s.basis_rows(l);
        nlohmann::json b;
        b["level"] = l;
        b["rank"] = s.rank_at(l);
        b["pairs"] = s.interaction[l - 1].pair_count();
        b["transfer_parameters"] = transfer;
        b["net_parameters"] = std::int64_t(net.zeta()) * s.interaction[l - 1].entry_count();
        branches.push_back(std::move(b));
    }
    j["branches"] = std::move(branches);
    return j;
}

inline nlohmann::json model_summary(ConvBaseline& net) {
    nlohmann::json j;
    j["model"] = "conv";
    j["n"] = net.size();
    j["layers"] = net.layer_count();
    j["channels"] = net.channels();
    j["kernel"] = net.kernel_width();
    j["output_scale"] = net.output_scale();
    j["parameter_count"] = net.parameter_count();
    return j;
}

} // namespace h2nn
