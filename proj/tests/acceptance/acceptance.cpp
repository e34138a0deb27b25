// Acceptance suite: one PASS/FAIL line per criterion, plus a JSON results file.
// Training-size knobs are flags so the comparative experiment can be re-run at other budgets.

#include "cgame/cli.hpp"
#include "cgame/error.hpp"
#include "cgame/evalkit.hpp"
#include "cgame/io.hpp"
#include "cgame/model.hpp"
#include "cgame/netgen.hpp"
#include "cgame/simkit.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

using namespace cgame;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ExperimentOptions {
    std::size_t rows = 3, cols = 3;
    std::size_t items = 2000;
    std::size_t trips_min = 2000, trips_max = 3000;
    std::size_t n_t = 12;
    std::uint64_t data_seed = 2024;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::size_t n_f = 64, n_h = 128;
    std::size_t iters = 10000;
    std::size_t batch = 32;
    double lr = 0.03;
    double momentum = 0.9;
    std::string normalization = "rms";
    // a matcher step every 50 iterations kept resetting the gate before the decoders adapted
    std::size_t n_s = 64, p = 8, q = 4, interval = 500;
    double lambda = 0.9;
    std::size_t eval_interval = 100;
};

struct Outcome {
    bool pass = false;
    std::string detail;
    json data = json::object();
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

// 1. Conservation of trips in D and link-steps in F, and agreement with the naive loops.
Outcome conservation() {
    Outcome out;
    std::size_t checked = 0, failures = 0;
    const std::pair<std::size_t, std::size_t> grids[] = {{2, 2}, {3, 3}, {2, 4}, {4, 3}};
    for (std::size_t g = 0; g < 4; ++g) {
        simkit::DatasetConfig cfg;
        cfg.network = {grids[g].first, grids[g].second, 800.0 + 400.0 * g};
        cfg.sim.n_t = 6 + 2 * g;
        cfg.sim.trips_min = 1;
        cfg.sim.trips_max = 1500;
        cfg.sim.route_cap = 8;
        const simkit::SimulationContext ctx(cfg);
        for (std::size_t i = 0; i < 25; ++i) {
            const auto gen = simkit::generate_item(ctx, simkit::item_seed(100 + g, i));
            const auto& f = gen.item.counts.values;
            const auto& d = gen.item.od.values;
            std::uint64_t steps = 0;
            for (const auto& r : gen.routes) steps += r.trip_count * r.steps.size();
            const double sum_d = std::accumulate(d.values().begin(), d.values().end(), 0.0);
            const double sum_f = std::accumulate(f.values().begin(), f.values().end(), 0.0);
            const bool ok = sum_d == static_cast<double>(gen.trips) && sum_f == static_cast<double>(steps) &&
                            f == oracle::naive_counts(gen.routes, f.rows(), f.cols()) &&
                            d == oracle::naive_od(gen.routes, d.rows());
            failures += !ok;
            ++checked;
        }
    }
    out.pass = failures == 0 && checked == 100;
    out.detail = std::to_string(checked) + " items, " + std::to_string(failures) + " mismatches";
    out.data = {{"items", checked}, {"mismatches", failures}};
    return out;
}

// 2. Route enumeration equals brute-force DFS filtered to minimal hop count.
Outcome route_oracle() {
    Outcome out;
    std::size_t pairs = 0, mismatches = 0;
    for (std::size_t rows = 2; rows <= 4; ++rows) {
        for (std::size_t cols = 2; cols <= 4; ++cols) {
            if (rows * cols > 12) continue; // up to 3x4 / 4x3
            const auto g = netgen::build_grid(rows, cols, 1.0);
            for (netgen::SpotId o = 0; o < g.spot_count(); ++o) {
                for (netgen::SpotId d = 0; d < g.spot_count(); ++d) {
                    if (o == d) continue;
                    std::vector<std::vector<netgen::LinkId>> got;
                    for (const auto& r : netgen::enumerate_routes(g, o, d, 100000)) got.push_back(r.links);
                    mismatches += got != oracle::all_shortest_simple_paths(g, o, d);
                    ++pairs;
                }
            }
        }
    }
    out.pass = mismatches == 0;
    out.detail = std::to_string(pairs) + " ordered pairs, " + std::to_string(mismatches) + " mismatches";
    out.data = {{"pairs", pairs}, {"mismatches", mismatches}};
    return out;
}

// 3. Analytic gradients of encode -> gate -> decode vs central differences.
Outcome gradient_check() {
    Outcome out;
    double worst = 0.0;
    json per = json::array();
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const double e = oracle::full_pass_gradcheck(s);
        per.push_back(e);
        worst = std::max(worst, e);
    }
    out.pass = worst < 1e-4;
    out.detail = "max relative error " + fmt(worst, 3) + " over 10 instances (bound 1e-4)";
    out.data = {{"relative_errors", per}, {"max", worst}};
    return out;
}

// 4. Matcher invariants.
Outcome matcher_invariants() {
    using namespace model;
    Outcome out;
    Rng rng(4242);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    auto rand_matrix = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.values()) v = u(rng);
        return m;
    };

    // (a) identity gate at initialisation, exact
    bool identity = true;
    for (std::size_t nf : {1u, 7u, 64u, 256u}) {
        MatcherHyper h;
        h.n_s = 1 + nf % 17 + 8;
        h.p = 1;
        const auto st = GraphMatcherState::initial(nf, h);
        const Matrix x = rand_matrix(5, nf);
        identity = identity && apply_matcher(x, st) == x;
    }

    // (b) candidate entries within [-1, 1]
    bool bounded = true;
    for (int t = 0; t < 1000; ++t) {
        std::vector<FeaturePair> pairs;
        const std::size_t nf = 1 + rng() % 6, b = 1 + rng() % 5;
        for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) pairs.push_back({rand_matrix(b, nf), rand_matrix(b, nf)});
        const Matrix c = matcher_candidates(pairs, &rng);
        for (double v : c.values()) bounded = bounded && v >= -1.0 && v <= 1.0;
    }

    // (c) V bound over random refreshes
    std::size_t bound_violations = 0;
    std::uniform_real_distribution<double> lam(0.0, 0.999);
    for (int t = 0; t < 1000; ++t) {
        MatcherHyper h;
        h.n_s = 2 + rng() % 6;
        h.p = 1;
        h.q = 1 + rng() % 6;
        h.lambda = lam(rng);
        const std::size_t nf = 1 + rng() % 6;
        Matrix m = rand_matrix(nf, h.n_s);
        for (double& v : m.values()) v = std::clamp(v / 3.0, -1.0, 1.0);
        const GraphMatcherState st{m, Matrix(1, h.n_s, 1.0), h};
        std::vector<FeaturePair> pairs;
        const std::size_t b = 1 + rng() % 4;
        for (std::size_t i = 0; i < h.q; ++i) pairs.push_back({rand_matrix(b, nf), rand_matrix(b, nf)});
        const double lq = std::pow(h.lambda, static_cast<double>(h.q));
        const double bound = lq + (1.0 - lq) / (1.0 - h.lambda);
        const Matrix v = matcher_value_refresh(st, pairs);
        for (double x : v.values()) bound_violations += std::abs(x) > bound + 1e-12;
    }

    // (d) retention inside matcher_step equals a sort oracle on independently accumulated values
    std::size_t retention_mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        MatcherHyper h;
        h.n_s = 2 + rng() % 8;
        h.p = 1 + rng() % (h.n_s - 1);
        h.q = 1 + rng() % 3;
        h.lambda = lam(rng);
        const std::size_t nf = 1 + rng() % 5, b = 1 + rng() % 4;
        Matrix m(nf, h.n_s);
        // coarse values so that ties occur
        for (double& v : m.values()) v = static_cast<double>(static_cast<int>(rng() % 5) - 2) / 2.0;
        Matrix v0(1, h.n_s);
        for (double& v : v0.values()) v = static_cast<double>(rng() % 3);
        const GraphMatcherState st{m, v0, h};
        std::vector<FeaturePair> cand, vals;
        for (std::size_t i = 0; i < h.p; ++i) cand.push_back({rand_matrix(b, nf), rand_matrix(b, nf)});
        for (std::size_t i = 0; i < h.q; ++i) vals.push_back({rand_matrix(b, nf), rand_matrix(b, nf)});

        std::vector<double> acc(v0.values().begin(), v0.values().end());
        for (const auto& pr : cand) {
            const auto c = numcore::structure_cosine(pr.hx, pr.hy, m);
            for (std::size_t s = 0; s < acc.size(); ++s) acc[s] = h.lambda * acc[s] + c[s];
        }
        std::vector<std::pair<double, std::size_t>> keyed;
        for (std::size_t s = 0; s < acc.size(); ++s) keyed.push_back({-acc[s], s});
        std::sort(keyed.begin(), keyed.end());

        Rng step_rng(rng());
        const auto next = matcher_step(st, cand, vals, step_rng);
        bool ok = next.m.cols() == h.n_s;
        for (std::size_t c = 0; ok && c < h.n_s - h.p; ++c)
            for (std::size_t r = 0; r < nf; ++r) ok = ok && next.m(r, c) == m(r, keyed[c].second);
        retention_mismatches += !ok;
    }

    out.pass = identity && bounded && bound_violations == 0 && retention_mismatches == 0;
    out.detail = std::string("identity ") + (identity ? "exact" : "BROKEN") + ", candidates " +
                 (bounded ? "in [-1,1]" : "OUT OF RANGE") + ", V-bound violations " + std::to_string(bound_violations) +
                 "/1000, retention mismatches " + std::to_string(retention_mismatches) + "/1000";
    out.data = {{"identity_exact", identity},
                {"candidates_bounded", bounded},
                {"v_bound_violations", bound_violations},
                {"retention_mismatches", retention_mismatches}};
    return out;
}

// 5. Metric hand examples and the ideal evaluation.
Outcome metric_oracles() {
    using namespace evalkit;
    using V = std::vector<double>;
    Outcome out;
    std::vector<std::string> failed;
    auto expect = [&](const std::string& name, double got, double want) {
        if (!(std::abs(got - want) <= 1e-12)) failed.push_back(name + "=" + fmt(got, 17));
    };
    expect("rmse(y,y)", rmse(V{1, 2}, V{1, 2}), 0);
    expect("mae(y,y)", mae(V{1, 2}, V{1, 2}), 0);
    expect("rmse(0,4|2,2)", rmse(V{0, 4}, V{2, 2}), 2);
    expect("mae(0,4|2,2)", mae(V{0, 4}, V{2, 2}), 2);
    expect("rmse(1,2,3|2,2,2)", rmse(V{1, 2, 3}, V{2, 2, 2}), std::sqrt(2.0 / 3.0));
    expect("mae(1,2,3|2,2,2)", mae(V{1, 2, 3}, V{2, 2, 2}), 2.0 / 3.0);
    expect("acc(y,y)", accuracy(V{3, 4}, V{3, 4}), 1);
    expect("acc(0,4|2,2)", accuracy(V{0, 4}, V{2, 2}), 0);
    expect("acc(10,10|9,11)", accuracy(V{10, 10}, V{9, 11}), 0.9);
    expect("r2(y,y)", r2(V{1, 5, 2}, V{1, 5, 2}), 1);
    expect("var(y,y)", var_score(V{1, 5, 2}, V{1, 5, 2}), 1);
    expect("r2(0,4|2,2)", r2(V{0, 4}, V{2, 2}), 0);
    expect("var(0,4|2,2)", var_score(V{0, 4}, V{2, 2}), 0);
    expect("r2(mean)", r2(V{1, 2, 6}, V{3, 3, 3}), 0);
    Matrix y(3, 3, 1.0);
    y(1, 2) = 100.0;
    Matrix close = y;
    close(1, 2) = 85.0;
    expect("hotspot(y,y)", hotspot_recall(y, y), 1);
    expect("hotspot(y,0)", hotspot_recall(y, Matrix(3, 3)), 0);
    expect("hotspot(85 vs 100)", hotspot_recall(y, close), 1);

    simkit::DatasetConfig cfg;
    cfg.network = {3, 3, 2000.0};
    cfg.sim.n_items = 20;
    cfg.sim.trips_min = 200;
    cfg.sim.trips_max = 400;
    const auto ds = simkit::generate_dataset(cfg, 5);
    const auto m = evaluate([](const simkit::DatasetItem& it) { return it.od; }, ds, Split::All);
    expect("evaluate.rmse", m.rmse, 0);
    expect("evaluate.mae", m.mae, 0);
    expect("evaluate.accuracy", m.accuracy, 1);
    expect("evaluate.r2", m.r2, 1);
    expect("evaluate.var_score", m.var_score, 1);

    out.pass = failed.empty();
    out.detail = failed.empty() ? "22 hand examples exact to 1e-12, evaluate(y, y) = (0, 0, 1, 1, 1)"
                                : "failed: " + std::accumulate(std::next(failed.begin()), failed.end(), failed.front(),
                                                                [](std::string a, const std::string& b) {
                                                                    return a + ", " + b;
                                                                });
    out.data = {{"failed", failed}};
    return out;
}

struct RunMetrics {
    evalkit::Metrics metrics;
    double val_mse = 0.0;
    double initial_window = 0.0, final_window = 0.0;
    std::size_t matcher_steps = 0, best_iteration = 0;
    double seconds = 0.0;
};

json run_json(const RunMetrics& r) {
    const auto& m = r.metrics;
    return {{"val_mse", r.val_mse},
            {"rmse", m.rmse},
            {"mae", m.mae},
            {"accuracy", m.accuracy},
            {"r2", m.r2},
            {"var_score", m.var_score},
            {"hotspot_recall", m.hotspot_recall},
            {"hotspot_items", m.hotspot_items},
            {"train_window_initial", r.initial_window},
            {"train_window_final", r.final_window},
            {"matcher_steps", r.matcher_steps},
            {"best_iteration", r.best_iteration},
            {"seconds", r.seconds}};
}

double window(const std::vector<double>& v, std::size_t from, std::size_t n) {
    n = std::min(n, v.size() - from);
    return std::accumulate(v.begin() + from, v.begin() + from + n, 0.0) / static_cast<double>(n);
}

struct Experiment {
    std::vector<RunMetrics> cgame, ablation;
    double gen_seconds = 0.0, total_seconds = 0.0;
    json config;
};

Experiment run_experiment(const ExperimentOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Experiment ex;
    simkit::DatasetConfig dcfg;
    dcfg.network = {o.rows, o.cols, 2000.0};
    dcfg.sim.n_items = o.items;
    dcfg.sim.n_t = o.n_t;
    dcfg.sim.trips_min = o.trips_min;
    dcfg.sim.trips_max = o.trips_max;
    const auto ds = simkit::generate_dataset(dcfg, o.data_seed);
    ex.gen_seconds = seconds_since(t0);

    model::TrainConfig tc;
    tc.lr = o.lr;
    tc.momentum = o.momentum;
    tc.batch_size = o.batch;
    tc.max_iters = o.iters;
    tc.eval_interval = o.eval_interval;
    tc.normalization = model::normalization_from_string(o.normalization);
    tc.matcher.n_s = o.n_s;
    tc.matcher.p = o.p;
    tc.matcher.q = o.q;
    tc.matcher.lambda = o.lambda;
    tc.matcher.update_interval = o.interval;
    const auto dims = model::dims_for(ds, o.n_f, o.n_h);

    ex.config = {{"grid", {o.rows, o.cols}},
                 {"items", o.items},
                 {"train_items", ds.split.train.size()},
                 {"validation_items", ds.split.validation.size()},
                 {"trips_per_item", {o.trips_min, o.trips_max}},
                 {"n_t", o.n_t},
                 {"data_seed", o.data_seed},
                 {"seeds", o.seeds},
                 {"n_f", o.n_f},
                 {"n_h", o.n_h},
                 {"train", tc}};

    for (auto seed : o.seeds) {
        tc.seed = seed;
        for (bool ablation : {false, true}) {
            const auto t1 = std::chrono::steady_clock::now();
            const auto res = ablation ? model::train_ablation(ds, tc, dims) : model::train(ds, tc, dims);
            RunMetrics r;
            r.metrics = evalkit::evaluate(res.model, ds, evalkit::Split::Validation);
            r.val_mse = r.metrics.rmse * r.metrics.rmse;
            const auto& c = res.curve.train;
            const std::size_t w = std::min<std::size_t>(200, c.size());
            r.initial_window = window(c, 0, w);
            r.final_window = window(c, c.size() - w, w);
            r.matcher_steps = res.curve.matcher_steps;
            r.best_iteration = res.curve.best_iteration;
            r.seconds = seconds_since(t1);
            std::cerr << "  seed " << seed << (ablation ? " ablation" : " c-game  ") << ": val MSE " << fmt(r.val_mse)
                      << ", accuracy " << fmt(r.metrics.accuracy) << ", hotspot " << fmt(r.metrics.hotspot_recall)
                      << ", loss window " << fmt(r.initial_window) << " -> " << fmt(r.final_window) << " ("
                      << fmt(r.seconds, 3) << " s)\n";
            (ablation ? ex.ablation : ex.cgame).push_back(r);
        }
    }
    ex.total_seconds = seconds_since(t0);
    return ex;
}

double mean_of(const std::vector<RunMetrics>& runs, const std::function<double(const RunMetrics&)>& f) {
    double acc = 0.0;
    for (const auto& r : runs) acc += f(r);
    return acc / static_cast<double>(runs.size());
}

// 6. C-GAME beats the identity-matcher ablation on validation MSE and Accuracy.
Outcome comparative(const Experiment& ex) {
    Outcome out;
    const double mse_c = mean_of(ex.cgame, [](const RunMetrics& r) { return r.val_mse; });
    const double mse_a = mean_of(ex.ablation, [](const RunMetrics& r) { return r.val_mse; });
    const double acc_c = mean_of(ex.cgame, [](const RunMetrics& r) { return r.metrics.accuracy; });
    const double acc_a = mean_of(ex.ablation, [](const RunMetrics& r) { return r.metrics.accuracy; });
    const bool in_time = ex.total_seconds < 1800.0;
    out.pass = mse_c < mse_a && acc_c - acc_a >= 0.02 && in_time;
    out.detail = "val MSE " + fmt(mse_c) + " vs ablation " + fmt(mse_a) + ", accuracy " + fmt(acc_c) + " vs " +
                 fmt(acc_a) + " (delta " + fmt(acc_c - acc_a, 3) + ", need >= 0.02; pilot target 0.85 " +
                 (acc_c >= 0.85 ? "met" : "not met") + "), " + fmt(ex.total_seconds, 4) + " s";
    json cg = json::array(), ab = json::array();
    for (const auto& r : ex.cgame) cg.push_back(run_json(r));
    for (const auto& r : ex.ablation) ab.push_back(run_json(r));
    out.data = {{"config", ex.config},
                {"cgame", cg},
                {"ablation", ab},
                {"mean_val_mse", {{"cgame", mse_c}, {"ablation", mse_a}}},
                {"mean_accuracy", {{"cgame", acc_c}, {"ablation", acc_a}}},
                {"accuracy_target_0_85_met", acc_c >= 0.85},
                {"generation_seconds", ex.gen_seconds},
                {"total_seconds", ex.total_seconds}};
    return out;
}

// 7. Training-loss windows shrink to at most a quarter, every seed.
Outcome convergence(const Experiment& ex) {
    Outcome out;
    out.pass = true;
    json ratios = json::array(), ablation_ratios = json::array();
    std::string worst;
    double worst_ratio = 0.0;
    for (const auto& r : ex.cgame) {
        const double ratio = r.final_window / r.initial_window;
        ratios.push_back(ratio);
        out.pass = out.pass && ratio <= 0.25;
        worst_ratio = std::max(worst_ratio, ratio);
    }
    for (const auto& r : ex.ablation) ablation_ratios.push_back(r.final_window / r.initial_window);
    out.detail = "worst final/initial 200-iteration window ratio " + fmt(worst_ratio, 3) + " over " +
                 std::to_string(ex.cgame.size()) + " seeds (bound 0.25)";
    out.data = {{"cgame_ratios", ratios}, {"ablation_ratios", ablation_ratios}};
    return out;
}

// 9. C-GAME captures hotspots better than the ablation.
Outcome hotspots(const Experiment& ex) {
    Outcome out;
    const double c = mean_of(ex.cgame, [](const RunMetrics& r) { return r.metrics.hotspot_recall; });
    const double a = mean_of(ex.ablation, [](const RunMetrics& r) { return r.metrics.hotspot_recall; });
    out.pass = std::isfinite(c) && std::isfinite(a) && c > a;
    out.detail = "mean hotspot recall (k=2) " + fmt(c) + " vs ablation " + fmt(a);
    out.data = {{"cgame", c}, {"ablation", a}};
    return out;
}

std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
    }
    return files;
}

// 8. gen -> train -> eval twice with a fixed seed gives byte-identical artifacts.
Outcome determinism(const fs::path& scratch) {
    Outcome out;
    cli::RunConfig cfg;
    cfg.dataset.network = {3, 3, 2000.0};
    cfg.dataset.sim.n_items = 60;
    cfg.dataset.sim.trips_min = 300;
    cfg.dataset.sim.trips_max = 600;
    cfg.model.n_f = 16;
    cfg.model.n_h = 32;
    cfg.model.matcher.n_s = 8;
    cfg.model.matcher.p = 2;
    cfg.model.matcher.q = 2;
    cfg.model.matcher.update_interval = 20;
    cfg.train.base.max_iters = 100;
    cfg.train.base.batch_size = 8;
    cfg.train.base.lr = 0.01;
    cfg.train.base.normalization = model::NormalizationPolicy::Rms;
    cfg.train.seeds = {0, 1};

    std::ostringstream log;
    for (const char* run : {"a", "b"}) {
        const fs::path dir = scratch / run;
        fs::remove_all(dir);
        cli::cmd_gen(cfg, dir / "data", 11, log);
        const auto models = cli::cmd_train(cfg, dir / "data", dir / "runs", false, std::nullopt, log);
        cli::cmd_eval(models, dir / "data", dir / "report.json", log);
    }
    const auto a = tree_bytes(scratch / "a");
    const auto b = tree_bytes(scratch / "b");
    std::vector<std::string> differing;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != bytes) differing.push_back(name);
    }
    if (a.size() != b.size()) differing.push_back("<file set>");
    // manifest + blob, report, four files per seed
    const std::size_t expected = 3 + 4 * cfg.train.seeds.size();
    out.pass = differing.empty() && a.size() == expected;
    out.detail = std::to_string(a.size()) + " files compared, " + std::to_string(differing.size()) + " differ";
    out.data = {{"files", a.size()}, {"differing", differing}};
    fs::remove_all(scratch / "a");
    fs::remove_all(scratch / "b");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"C-GAME acceptance criteria"};
    std::string results_path;
    std::vector<int> only;
    ExperimentOptions o;
    app.add_option("--results", results_path, "Write a JSON results file");
    app.add_option("--only", only, "Run only these criteria");
    app.add_option("--items", o.items);
    app.add_option("--trips-min", o.trips_min);
    app.add_option("--trips-max", o.trips_max);
    app.add_option("--iters", o.iters);
    app.add_option("--batch", o.batch);
    app.add_option("--lr", o.lr);
    app.add_option("--momentum", o.momentum);
    app.add_option("--nf", o.n_f);
    app.add_option("--nh", o.n_h);
    app.add_option("--ns", o.n_s);
    app.add_option("--p", o.p);
    app.add_option("--q", o.q);
    app.add_option("--lambda", o.lambda);
    app.add_option("--interval", o.interval);
    app.add_option("--eval-interval", o.eval_interval);
    app.add_option("--normalization", o.normalization)->check(CLI::IsMember({"zscore", "rms", "none"}));
    app.add_option("--seeds", o.seeds);
    app.add_option("--data-seed", o.data_seed);
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    const fs::path scratch = fs::temp_directory_path() / "cgame_acceptance";
    fs::create_directories(scratch);

    std::map<int, Outcome> outcomes;
    std::map<int, double> seconds;
    auto run = [&](int id, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            outcomes[id] = fn();
        } catch (const std::exception& e) {
            outcomes[id] = {false, std::string("exception: ") + e.what(), json::object()};
        }
        seconds[id] = seconds_since(t0);
    };

    const char* names[] = {"",
                           "conservation",
                           "route enumeration oracle",
                           "gradient check",
                           "matcher invariants",
                           "metric oracles",
                           "comparative training",
                           "convergence",
                           "determinism",
                           "hotspot capture"};

    run(1, conservation);
    run(2, route_oracle);
    run(3, gradient_check);
    run(4, matcher_invariants);
    run(5, metric_oracles);
    run(8, [&] { return determinism(scratch); });
    if (wanted(6) || wanted(7) || wanted(9)) {
        std::optional<Experiment> ex;
        std::string failure;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ex = run_experiment(o);
        } catch (const std::exception& e) {
            failure = std::string("exception: ") + e.what();
        }
        const double t = seconds_since(t0);
        const std::pair<int, Outcome (*)(const Experiment&)> derived[] = {{6, comparative}, {7, convergence}, {9, hotspots}};
        for (const auto& [id, fn] : derived) {
            if (!wanted(id)) continue;
            outcomes[id] = ex ? fn(*ex) : Outcome{false, failure, json::object()};
            seconds[id] = t;
        }
    }

    // 1-4 carry a one-minute budget
    for (int id : {1, 2, 3, 4}) {
        if (outcomes.count(id) && seconds[id] >= 60.0) {
            outcomes[id].pass = false;
            outcomes[id].detail += " (over the 60 s budget)";
        }
    }

    bool all = true;
    json results = {{"format", "cgame-acceptance"}, {"version", 1}, {"criteria", json::object()}};
    for (const auto& [id, oc] : outcomes) {
        std::cout << "criterion " << id << " [" << names[id] << "]: " << (oc.pass ? "PASS" : "FAIL") << " - "
                  << oc.detail << " (" << fmt(seconds[id], 3) << " s)" << std::endl;
        all = all && oc.pass;
        results["criteria"][std::to_string(id)] = {
            {"name", names[id]}, {"pass", oc.pass}, {"detail", oc.detail}, {"seconds", seconds[id]}, {"data", oc.data}};
    }
    results["all_pass"] = all;
    if (!results_path.empty()) io::write_text(results_path, results.dump(2) + "\n");
    fs::remove_all(scratch);
    return all ? 0 : 1;
}
