// Command-line front end: skeleton construction, dataset generation,
// compression accuracy checks, training, evaluation, and run aggregation.
// Every write goes through the deterministic serializers, so rerunning a
// pipeline with the same flags and seeds yields byte-identical files.

#include <h2nn/io.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace h2nn;

namespace {

Kernel parse_kernel(const std::string& name) {
    if (name == "custom" || name == "custom-operator")
        return Kernel::custom_operator;
    if (name == "nbody" || name == "inverse-distance")
        return Kernel::inverse_distance;
    throw CLI::ValidationError("--kernel", "unknown kernel '" + name +
                                               "' (use custom or nbody)");
}

// the tree that gave the skeleton its ordering; datasets are stored in grid
// order and permuted into tree order before they touch the network
ClusterTree tree_for_skeleton(const H2Skeleton& s) {
    if (s.dim != 1)
        throw std::runtime_error("the command line drives 1D grids only");
    return build_cluster_tree(uniform_grid_1d(s.n), s.leaf_block);
}

std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
struct SkeletonFlags {
    int leaf = 20;
    double separation = 1.5;
    int rank = 8;

    void attach(CLI::App* cmd) {
        cmd->add_option("--leaf", leaf, "points per leaf box")->capture_default_str();
        cmd->add_option("--separation", separation, "box-width multiple separating close from far")
            ->capture_default_str();
        cmd->add_option("--rank", rank, "compression rank per level")->capture_default_str();
    }
};

int cmd_build_skeleton(int n, const SkeletonFlags& sk, const std::string& out) {
    H2Skeleton s = tensor_grid_skeleton(n, 1, sk.leaf, sk.separation, sk.rank);
    save_skeleton(s, out);
    std::int64_t far_pairs = 0;
    for (const auto& t : s.interaction)
        far_pairs += t.pair_count();
    std::cout << "skeleton: n=" << s.n << " levels=" << s.levels << " leaf=" << s.leaf_block
              << " close_pairs=" << s.close_template.pair_count() << " interaction_pairs=" << far_pairs
              << " -> " << out << "\n";
    return 0;
}

int cmd_gen_data(const std::string& kernel, int n, int samples, std::uint64_t seed,
                 const std::string& out) {
    Dataset ds = make_dataset(parse_kernel(kernel), n, samples, seed);
    save_dataset(ds, out);
    std::cout << "dataset: kernel=" << kernel_name(ds.kernel) << " n=" << n << " samples=" << samples
              << " seed=" << seed << " -> " << out << ".{json,bin}\n";
    return 0;
}

int cmd_oracle_check(const std::string& kernel, int n, const SkeletonFlags& sk, double tol,
                     int vectors, std::uint64_t seed, const std::string& out) {
    const Kernel k = parse_kernel(kernel);
    Eigen::MatrixXd a = kernel_matrix(k, n);
    H2Skeleton s = tensor_grid_skeleton(n, 1, sk.leaf, sk.separation, sk.rank);
    H2Matrix m = compress_dense(a, s, CompressOptions{tol});

    Rng rng(seed);
    double worst = 0;
    for (int v = 0; v < vectors; ++v) {
        Eigen::VectorXd q(n);
        for (int i = 0; i < n; ++i)
            q[i] = rng.uniform(-1.0, 1.0);
        Eigen::VectorXd dense = a * q;
        worst = std::max(worst, (h2_matvec(m, q) - dense).norm() / dense.norm());
    }
    const std::int64_t entries = count_entries(m);
    const std::int64_t dense_entries = std::int64_t(n) * n;

    std::string csv = "n,kernel,rank,leaf,separation,vectors,max_rel_error,entries,dense_entries,entry_ratio\n";
    csv += std::to_string(n) + "," + kernel_name(k) + "," + std::to_string(sk.rank) + "," +
           std::to_string(sk.leaf) + "," + csv_double(sk.separation) + "," + std::to_string(vectors) +
           "," + csv_double(worst) + "," + std::to_string(entries) + "," +
           std::to_string(dense_entries) + "," + csv_double(double(entries) / double(dense_entries)) +
           "\n";
    std::cout << csv;
    if (!out.empty())
        detail::open_out(out) << csv;
    return 0;
}

struct TrainFlags {
    std::string model = "h2nn";
    std::string data;
    std::string out;
    SkeletonFlags sk;
    TrainConfig cfg;
    std::uint64_t seed = 0;
};

int cmd_train(TrainFlags& f) {
    Dataset ds = load_dataset(f.data);
    fs::create_directories(f.out);
    f.cfg.seed = f.seed + 1; // batch schedule stream, distinct from the init stream

    std::vector<MetricsRow> log;
    nlohmann::json summary;
    double train_res = 0, val_res = 0;
    if (f.model == "h2nn") {
        H2Skeleton skel = tensor_grid_skeleton(ds.n, 1, f.sk.leaf, f.sk.separation, f.sk.rank);
        ClusterTree tree = tree_for_skeleton(skel);
        Dataset ordered{ds.kernel, ds.n, ds.seed, apply_permutation_rows(ds.inputs, tree.perm),
                        apply_permutation_rows(ds.targets, tree.perm)};
        auto [tr, va] = split(ordered, f.cfg.train_share, f.cfg.val_share);
        Rng rng(f.seed);
        H2Network net(skel, f.cfg.zeta, rng);
        net.set_output_scale(target_scale(tr));
        log = train(net, tr, va, f.cfg);
        train_res = mean_relative_residual(net, tr);
        val_res = mean_relative_residual(net, va);
        save_checkpoint(net, f.out + "/checkpoint");
        summary["model_summary"] = model_summary(net);
        summary["parameters"] = net.parameter_count();
    } else if (f.model == "conv") {
        auto [tr, va] = split(ds, f.cfg.train_share, f.cfg.val_share);
        Rng rng(f.seed);
        ConvBaseline net(ds.n, rng);
        net.set_output_scale(target_scale(tr));
        log = train(net, tr, va, f.cfg);
        train_res = mean_relative_residual(net, tr);
        val_res = mean_relative_residual(net, va);
        save_checkpoint(net, f.out + "/checkpoint");
        summary["model_summary"] = model_summary(net);
        summary["parameters"] = net.parameter_count();
    } else {
        throw CLI::ValidationError("--model", "unknown model '" + f.model + "' (use h2nn or conv)");
    }

    write_metrics_csv(log, f.out + "/metrics.csv");
    write_timing_csv(log, f.out + "/timing.csv");

    summary["model"] = f.model;
    summary["kernel"] = kernel_name(ds.kernel);
    summary["n"] = ds.n;
    summary["samples"] = ds.sample_count();
    summary["data_seed"] = ds.seed;
    summary["seed"] = f.seed;
    summary["iterations"] = f.cfg.iterations;
    summary["batch_size"] = f.cfg.batch_size;
    summary["zeta"] = f.cfg.zeta;
    summary["lr"] = f.cfg.adam.lr;
    summary["final_train_residual"] = train_res; // full-part means, not the capped per-iteration ones
    summary["final_val_residual"] = val_res;
    detail::open_out(f.out + "/summary.json") << summary.dump(2) << '\n';

    double seconds = 0;
    for (const MetricsRow& r : log)
        seconds += r.seconds;
    std::cout << "trained " << f.model << " on " << kernel_name(ds.kernel) << " n=" << ds.n << ": "
              << log.size() << " iterations in " << csv_double(seconds)
              << " s, train_residual=" << csv_double(train_res)
              << " val_residual=" << csv_double(val_res) << " -> " << f.out << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& part, int train_share,
             int val_share, const std::string& out) {
    Dataset ds = load_dataset(data);
    const std::string kind = checkpoint_model_kind(ckpt);

    double residual = 0;
    int used = 0;
    auto pick = [&](const Dataset& whole) {
        if (part == "all")
            return whole;
        auto [tr, va] = split(whole, train_share, val_share);
        if (part == "train")
            return tr;
        if (part == "val")
            return va;
        throw CLI::ValidationError("--part", "unknown part '" + part + "' (use train, val, or all)");
    };
    if (kind == "h2nn") {
        H2Network net = load_h2nn_checkpoint(ckpt);
        if (net.skeleton().n != ds.n)
            throw std::runtime_error("checkpoint is for n=" + std::to_string(net.skeleton().n) +
                                     ", dataset has n=" + std::to_string(ds.n));
        ClusterTree tree = tree_for_skeleton(net.skeleton());
        Dataset ordered{ds.kernel, ds.n, ds.seed, apply_permutation_rows(ds.inputs, tree.perm),
                        apply_permutation_rows(ds.targets, tree.perm)};
        Dataset sel = pick(ordered);
        residual = mean_relative_residual(net, sel);
        used = sel.sample_count();
    } else {
        ConvBaseline net = load_conv_checkpoint(ckpt);
        if (net.size() != ds.n)
            throw std::runtime_error("checkpoint is for n=" + std::to_string(net.size()) +
                                     ", dataset has n=" + std::to_string(ds.n));
        Dataset sel = pick(ds);
        residual = mean_relative_residual(net, sel);
        used = sel.sample_count();
    }

    std::string csv = "model,kernel,n,samples,part,mean_relative_residual\n";
    csv += kind + "," + kernel_name(ds.kernel) + "," + std::to_string(ds.n) + "," +
           std::to_string(used) + "," + part + "," + csv_double(residual) + "\n";
    std::cout << csv;
    if (!out.empty())
        detail::open_out(out) << csv;
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
    struct Row {
        std::string kernel, model;
        int n = 0;
        std::int64_t params = 0;
        double train_res = 0, val_res = 0;
        int iterations = 0;
    };
    std::vector<Row> rows;
    for (const std::string& dir : runs) {
        nlohmann::json j = nlohmann::json::parse(detail::open_in(dir + "/summary.json"));
        auto log = read_metrics_csv(dir + "/metrics.csv");
        Row r;
        r.kernel = j.at("kernel").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.n = j.at("n").get<int>();
        r.params = j.at("parameters").get<std::int64_t>();
        r.train_res = j.at("final_train_residual").get<double>();
        r.val_res = j.at("final_val_residual").get<double>();
        r.iterations = int(log.size());
        rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.kernel, a.n, a.model) < std::tie(b.kernel, b.n, b.model);
    });
    std::string csv = "kernel,n,model,parameters,iterations,train_residual,val_residual\n";
    for (const Row& r : rows)
        csv += r.kernel + "," + std::to_string(r.n) + "," + r.model + "," + std::to_string(r.params) +
               "," + std::to_string(r.iterations) + "," + csv_double(r.train_res) + "," +
               csv_double(r.val_res) + "\n";
    std::cout << csv;
    if (!out.empty())
        detail::open_out(out) << csv;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical-operator networks: data, training, and evaluation"};
    app.require_subcommand(1);

    // build-skeleton
    auto* sk_cmd = app.add_subcommand("build-skeleton", "partition a 1D grid and write the block templates");
    int sk_n = 320;
    SkeletonFlags sk_flags;
    std::string sk_out = "skeleton.json";
    sk_cmd->add_option("--n", sk_n, "grid size")->required();
    sk_flags.attach(sk_cmd);
    sk_cmd->add_option("--out", sk_out, "output path")->capture_default_str();

    // gen-data
    auto* gd_cmd = app.add_subcommand("gen-data", "generate a paired (q, A q) dataset");
    std::string gd_kernel = "custom";
    int gd_n = 320, gd_samples = 2000;
    std::uint64_t gd_seed = 0;
    std::string gd_out = "dataset";
    gd_cmd->add_option("--kernel", gd_kernel, "custom or nbody")->capture_default_str();
    gd_cmd->add_option("--n", gd_n, "grid size")->required();
    gd_cmd->add_option("--samples", gd_samples, "sample count")->capture_default_str();
    gd_cmd->add_option("--seed", gd_seed, "generator seed")->capture_default_str();
    gd_cmd->add_option("--out", gd_out, "output prefix (.json/.bin added)")->capture_default_str();

    // oracle-check
    auto* oc_cmd = app.add_subcommand("oracle-check", "compress a dense kernel and measure matvec accuracy");
    std::string oc_kernel = "nbody";
    int oc_n = 1024, oc_vectors = 10;
    double oc_tol = 0.0;
    std::uint64_t oc_seed = 0;
    SkeletonFlags oc_flags;
    std::string oc_out;
    oc_cmd->add_option("--kernel", oc_kernel, "custom or nbody")->capture_default_str();
    oc_cmd->add_option("--n", oc_n, "grid size")->required();
    oc_flags.attach(oc_cmd);
    oc_cmd->add_option("--tol", oc_tol, "relative singular-value cutoff (0 keeps fixed ranks)")
        ->capture_default_str();
    oc_cmd->add_option("--vectors", oc_vectors, "random probe vectors")->capture_default_str();
    oc_cmd->add_option("--seed", oc_seed, "probe seed")->capture_default_str();
    oc_cmd->add_option("--out", oc_out, "also write the CSV here");

    // train
    auto* tr_cmd = app.add_subcommand("train", "fit a model to a stored dataset");
    TrainFlags tf;
    tr_cmd->add_option("--model", tf.model, "h2nn or conv")->capture_default_str();
    tr_cmd->add_option("--data", tf.data, "dataset prefix from gen-data")->required();
    tr_cmd->add_option("--out", tf.out, "run output directory")
        ->envname("H2NN_OUT_DIR")
        ->required();
    tf.sk.attach(tr_cmd);
    tr_cmd->add_option("--zeta", tf.cfg.zeta, "layers per block-sparse net")->capture_default_str();
    tr_cmd->add_option("--iterations", tf.cfg.iterations, "Adam iterations")->capture_default_str();
    tr_cmd->add_option("--batch", tf.cfg.batch_size, "minibatch size")->capture_default_str();
    tr_cmd->add_option("--lr", tf.cfg.adam.lr, "learning rate")->capture_default_str();
    tr_cmd->add_option("--eps", tf.cfg.adam.eps, "Adam epsilon")->capture_default_str();
    tr_cmd->add_option("--train-share", tf.cfg.train_share, "split share for training")
        ->capture_default_str();
    tr_cmd->add_option("--val-share", tf.cfg.val_share, "split share for validation")
        ->capture_default_str();
    tr_cmd->add_option("--metric-subset", tf.cfg.metric_subset,
                       "samples per part for per-iteration metrics (0 = all)")
        ->capture_default_str();
    tr_cmd->add_option("--seed", tf.seed, "initialization seed (batch stream uses seed+1)")
        ->capture_default_str();

    // eval
    auto* ev_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset part");
    std::string ev_ckpt, ev_data, ev_part = "val", ev_out;
    int ev_tr_share = 2, ev_va_share = 1;
    ev_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint prefix")->required();
    ev_cmd->add_option("--data", ev_data, "dataset prefix")->required();
    ev_cmd->add_option("--part", ev_part, "train, val, or all")->capture_default_str();
    ev_cmd->add_option("--train-share", ev_tr_share, "split share for training")->capture_default_str();
    ev_cmd->add_option("--val-share", ev_va_share, "split share for validation")->capture_default_str();
    ev_cmd->add_option("--out", ev_out, "also write the CSV here");

    // report
    auto* rp_cmd = app.add_subcommand("report", "aggregate training runs into a comparison table");
    std::vector<std::string> rp_runs;
    std::string rp_out;
    rp_cmd->add_option("--run", rp_runs, "run directory (repeatable)")->required()->expected(-1);
    rp_cmd->add_option("--out", rp_out, "also write the CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sk_cmd->parsed())
            return cmd_build_skeleton(sk_n, sk_flags, sk_out);
        if (gd_cmd->parsed())
            return cmd_gen_data(gd_kernel, gd_n, gd_samples, gd_seed, gd_out);
        if (oc_cmd->parsed())
            return cmd_oracle_check(oc_kernel, oc_n, oc_flags, oc_tol, oc_vectors, oc_seed, oc_out);
        if (tr_cmd->parsed())
            return cmd_train(tf);
        if (ev_cmd->parsed())
            return cmd_eval(ev_ckpt, ev_data, ev_part, ev_tr_share, ev_va_share, ev_out);
        if (rp_cmd->parsed())
            return cmd_report(rp_runs, rp_out);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
