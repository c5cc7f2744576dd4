// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Desk-scale dataset runs read CSVs from <root>/data (see
// scripts/fetch_datasets.py).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hfnt/runner.hpp"

using namespace hfnt;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// brute-force dominance-table oracle
std::vector<std::vector<std::size_t>> oracle_fronts(const std::vector<ObjectiveTriple>& pop) {
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<bool> assigned(pop.size(), false);
    std::size_t left = pop.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (assigned[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pop.size() && !dominated; ++j)
                if (j != i && !assigned[j] && dominates(pop[j], pop[i])) dominated = true;
            if (!dominated) front.push_back(i);
        }
        for (std::size_t i : front) assigned[i] = true;
        left -= front.size();
        fronts.push_back(std::move(front));
    }
    return fronts;
}

void criterion_sort_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240501);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(50);
        std::vector<ObjectiveTriple> pop;
        for (std::size_t i = 0; i < n; ++i)
            pop.push_back({rng.uniform(0, 1), static_cast<double>(1 + rng.uniform_index(30)),
                           -static_cast<double>(1 + rng.uniform_index(7))});
        auto got = nondominated_sort(pop);
        auto want = oracle_fronts(pop);
        if (got.size() != want.size()) {
            ++mismatches;
            continue;
        }
        for (std::size_t f = 0; f < got.size(); ++f) {
            std::sort(got[f].begin(), got[f].end());
            if (got[f] != want[f]) ++mismatches;
        }
    }
    const double secs = seconds_since(t0);
    report("nondominated-sort oracle equivalence", mismatches == 0 && secs < 10.0,
           "200 random populations, " + std::to_string(mismatches) + " mismatching fronts, " +
               std::to_string(secs) + " s (< 10 s)");
}

void criterion_de_sphere() {
    const auto t0 = std::chrono::steady_clock::now();
    int hits = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        DeConfig cfg;
        cfg.pop_size = 50;
        cfg.max_evaluations = 50 * 1000;
        cfg.lower.assign(5, -1.0);
        cfg.upper.assign(5, 1.0);
        Rng rng(seed);
        const auto r = de_optimize(
            [](std::span<const double> w) {
                double s = 0.0;
                for (double v : w) s += v * v;
                return s;
            },
            cfg, rng);
        if (r.best_fitness <= 1e-4) ++hits;
        worst = std::max(worst, r.best_fitness);
    }
    const double secs = seconds_since(t0);
    report("DE convergence on the 5-d sphere", hits >= 9 && secs < 30.0,
           std::to_string(hits) + "/10 seeds reached 1e-4 (need >= 9), worst " +
               std::to_string(worst) + ", " + std::to_string(secs) + " s (< 30 s)");
}

// independent recursive evaluator, written from the activation table
double naive_eval(const TreeNode& n, const std::vector<double>& row) {
    if (n.children.empty()) return row.at(static_cast<std::size_t>(n.feature));
    double x = 0.0;
    for (std::size_t i = 0; i < n.children.size(); ++i)
        x += n.weights[i] * naive_eval(n.children[i], row);
    const auto guard = [](double d) { return std::fabs(d) < 1e-9 ? (d < 0 ? -1e-9 : 1e-9) : d; };
    const auto cexp = [](double e) { return std::exp(std::min(60.0, std::max(-60.0, e))); };
    const double a = n.a, b = n.b;
    switch (n.activation) {
    case 1: return cexp(-((x - a) * (x - a)) / guard(b * b));
    case 2: return (std::exp(x) - std::exp(-x)) / (std::exp(x) + std::exp(-x));
    case 3: return 1.0 / (1.0 + cexp(-x));
    case 4: return a * (1.0 / (1.0 + cexp(-x))) + b;
    case 5: return a * ((std::exp(x) - std::exp(-x)) / (std::exp(x) + std::exp(-x))) + b;
    case 6: {
        const double e = cexp(-2.0 * x * a);
        return (1.0 - e) / guard(a * (1.0 + e));
    }
    default: {
        const double am = std::fabs(a);
        return (2.0 * am) / (1.0 + cexp(-2.0 * am * x));
    }
    }
}

void criterion_tree_eval_oracle() {
    GrowthLimits lim; // depth 4, arity 5, all seven kinds
    Rng rng(987);
    std::size_t bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const NeuralTree t = random_tree(6, lim, rng);
        std::vector<double> row(6);
        for (auto& v : row) v = rng.uniform(0, 1);
        const double diff = std::fabs(eval_tree(t, row) - naive_eval(t.root, row));
        worst = std::max(worst, diff);
        if (!(diff <= 1e-12)) ++bad;
    }
    report("tree-evaluation oracle agreement", bad == 0,
           "1000 random (tree,row) pairs, max |diff| " + std::to_string(worst) +
               " (tolerance 1e-12)");
}

RunConfig desk_config(const fs::path& dataset, TaskKind task, const std::string& cv,
                      const fs::path& out, std::uint64_t seed, std::size_t batches) {
    RunConfig cfg; // engine defaults: pop 30, 3 reps x 30 iters x 1000 DE iters, DE pop 50
    cfg.dataset_path = dataset.string();
    cfg.task = task;
    cfg.cv = CvSpec::parse(cv);
    cfg.out_dir = out.string();
    cfg.seed = seed;
    cfg.batches = batches;
    return cfg;
}

void criterion_budget(const fs::path& work) {
    // defaults on a small synthetic regression set; exact count per fold run
    const fs::path csv = work / "budget_toy.csv";
    {
        std::ofstream out(csv);
        out << "x1,x2,y\n";
        Rng rng(5);
        for (int i = 0; i < 40; ++i) {
            const double a = rng.uniform(0, 1), b = rng.uniform(0, 1);
            out << a << "," << b << "," << (0.5 * a + 0.5 * b) << "\n";
        }
    }
    RunConfig cfg = desk_config(csv, TaskKind::regression, "kfold:2", work / "budget_run", 1, 1);
    const TrainSummary sum = run_train(cfg);
    bool ok = cfg.expected_evaluations() == 154080;
    std::uint64_t spent = 0;
    for (const auto& fold : sum.batches[0]) {
        spent = fold.evaluations;
        if (fold.evaluations != 154080) ok = false;
    }
    report("function-evaluation budget reproduction", ok,
           "default parameter set spent " + std::to_string(spent) +
               " objective evaluations per training run (need exactly 154080)");
}

void criterion_mgs(const fs::path& work, fs::path& run_dir_out) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path series_csv = work / "mgs.csv";
    write_series_csv(series_csv, mackey_glass(1000, 42));

    RunConfig cfg = desk_config(series_csv, TaskKind::timeseries, "holdout:0.5",
                                work / "mgs_run", 1000, 10); // 10 seeds as batches
    cfg.lags = 4;
    cfg.horizon = 1;
    const TrainSummary sum = run_train(cfg);
    double best = 1e30, mean = 0.0;
    for (const auto& batch : sum.batches) {
        best = std::min(best, batch[0].test.rmse);
        mean += batch[0].test.rmse / 10.0;
    }
    const double secs = seconds_since(t0);
    run_dir_out = work / "mgs_run";
    report("Mackey-Glass desk-scale", best <= 0.12 && secs < 15 * 60,
           "10 seeds, best test RMSE " + std::to_string(best) + " (need <= 0.12), mean " +
               std::to_string(mean) + ", " + std::to_string(secs) + " s (< 900 s)");
}

bool classification_desk(const std::string& name, const fs::path& data_csv,
                         const fs::path& run_dir, double min_accuracy,
                         double time_limit_s, fs::path& run_dir_out) {
    if (!fs::exists(data_csv)) {
        report(name, false,
               "dataset " + data_csv.string() +
                   " not present; run scripts/fetch_datasets.py (needs network access to "
                   "materialize it) and re-run");
        return false;
    }
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = desk_config(data_csv, TaskKind::classification, "kfold:10", run_dir, 7, 3);
    const TrainSummary sum = run_train(cfg);
    double mean = 0.0;
    std::size_t n = 0;
    for (const auto& batch : sum.batches)
        for (const auto& fold : batch) {
            mean += fold.test.accuracy.value_or(0.0);
            ++n;
        }
    mean /= static_cast<double>(n);
    const double secs = seconds_since(t0);
    const bool ok = mean >= min_accuracy && (time_limit_s <= 0 || secs < time_limit_s);
    run_dir_out = run_dir;
    report(name, ok,
           "10-fold CV x 3 seeds, mean test accuracy " + std::to_string(mean) + " (need >= " +
               std::to_string(min_accuracy) + "), " + std::to_string(secs) + " s");
    return ok;
}

void criterion_ensemble_no_regression(const std::vector<fs::path>& run_dirs) {
    std::size_t checked = 0, violations = 0;
    double worst_gap = 0.0;
    for (const fs::path& dir : run_dirs) {
        if (dir.empty() || !fs::exists(dir / "config.json")) continue;
        RunConfig cfg;
        cfg.out_dir = dir.string();
        cfg.bag_size = 10;
        const auto results = run_ensemble(cfg);
        for (const auto& batch : results)
            for (const auto& o : batch) {
                ++checked;
                const double gap = o.fit_error - o.best_single_error;
                worst_gap = std::max(worst_gap, gap);
                if (gap > 1e-12) ++violations;
            }
    }
    report("ensemble weight fitting never regresses", checked > 0 && violations == 0,
           std::to_string(checked) + " ensembles fitted across all dataset runs, " +
               std::to_string(violations) + " above the best single member (worst gap " +
               std::to_string(worst_gap) + ", tolerance 1e-12)");
}

void criterion_single_vs_multi(const fs::path& work) {
    const auto series = mackey_glass(1000, 42);
    const Dataset ds = scale(lag_embed(series, 4, 1));
    const SplitPlan split = make_holdout(ds, 0.5);
    const Dataset train = subset(ds, split.train_indices(0));

    double mean_single = 0.0, mean_multi = 0.0;
    const int pairs = 8;
    detail::parallel_runs(pairs, 0, [&](std::size_t seed) {
        MogpConfig cfg; // defaults: pop 30, 30 iterations
        const auto mo = evolve(train, cfg, Rng::stream(seed, "fig4.multi"));
        const auto so = evolve_single_objective(train, cfg, Rng::stream(seed, "fig4.single"));
        double sum_mo = 0.0, sum_so = 0.0;
        for (const auto& m : mo.members) sum_mo += m.objectives.size;
        for (const auto& m : so.members) sum_so += m.objectives.size;
        // accumulation order fixed by seed index
        static std::mutex mu;
        std::lock_guard lock(mu);
        mean_multi += sum_mo / (30.0 * pairs);
        mean_single += sum_so / (30.0 * pairs);
    });
    (void)work;
    report("single- vs multi-objective tree growth", mean_single > mean_multi,
           "8 paired seeded runs, mean final tree size " + std::to_string(mean_single) +
               " (single) vs " + std::to_string(mean_multi) + " (multi); single must exceed");
}

void criterion_property_suites(const fs::path& work) {
    std::string detail;
    bool ok = true;
    GrowthLimits lim;
    Rng rng(31415);

    // encode/decode and JSON round trips
    for (int i = 0; i < 200 && ok; ++i) {
        const NeuralTree t = random_tree(5, lim, rng);
        if (decode_params(t, encode_params(t).values) != t) {
            ok = false;
            detail = "encode/decode round trip failed";
        }
        if (tree_from_json(tree_to_json(t)) != t) {
            ok = false;
            detail = "tree JSON round trip failed";
        }
    }

    // monotone elitism on a toy split
    if (ok) {
        Dataset toy;
        toy.n_cols = 2;
        toy.task = TaskKind::regression;
        Rng data(1);
        for (int i = 0; i < 24; ++i) {
            const double a = data.uniform(0, 1), b = data.uniform(0, 1);
            toy.features.push_back(a);
            toy.features.push_back(b);
            toy.targets.push_back(0.5 * (a + b));
        }
        for (std::uint64_t seed = 0; seed < 5 && ok; ++seed) {
            MogpConfig cfg;
            cfg.pop_size = 24;
            Evolution e(toy, cfg, Rng(seed));
            e.initialize();
            double prev =
                e.population().members[e.population().best_error_index()].objectives.error;
            e.run(10);
            for (const auto& log : e.logs()) {
                if (log.min_error > prev + 1e-15) {
                    ok = false;
                    detail = "min error increased across generations";
                }
                prev = log.min_error;
            }
        }
    }

    // DE bound containment
    if (ok) {
        DeConfig cfg;
        cfg.pop_size = 10;
        cfg.max_evaluations = 10 * 40;
        cfg.lower.assign(3, -1.0);
        cfg.upper.assign(3, 1.0);
        Rng r2(7);
        const auto res = de_optimize(
            [](std::span<const double> w) {
                double s = 0.0;
                for (double v : w) s += (v - 3.0) * (v - 3.0);
                return s;
            },
            cfg, r2);
        for (double v : res.best)
            if (v < -1.0 || v > 1.0) {
                ok = false;
                detail = "DE trial escaped the bounds";
            }
    }

    // vote scale-invariance and diversity bounds
    if (ok) {
        Rng r3(17);
        for (int i = 0; i < 200 && ok; ++i) {
            std::vector<int> votes(5);
            std::vector<double> w(5);
            for (int t = 0; t < 5; ++t) {
                votes[t] = static_cast<int>(r3.uniform_index(3));
                w[t] = r3.uniform(0.01, 1.0);
            }
            const int before = weighted_vote(votes, w, 3);
            const double c = r3.uniform(0.1, 10.0);
            std::vector<double> scaled = w;
            for (double& v : scaled) v *= c;
            if (weighted_vote(votes, scaled, 3) != before) {
                ok = false;
                detail = "vote changed under positive weight rescaling";
            }
            std::vector<NeuralTree> bag;
            const std::size_t m = 1 + r3.uniform_index(6);
            for (std::size_t t = 0; t < m; ++t) bag.push_back(random_tree(3, lim, r3));
            const double div = bag_diversity(bag);
            if (!(div > 0.0 && div <= 1.0)) {
                ok = false;
                detail = "bag diversity left (0,1]";
            }
        }
    }
    (void)work;
    report("module property suites (compact re-run)", ok,
           ok ? "round trips, monotone elitism, bound containment, vote scale-invariance, "
                "diversity bounds all hold"
              : detail);
}

} // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::current_path();
    const fs::path work = fs::temp_directory_path() / "hfnt_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    criterion_sort_oracle();
    criterion_de_sphere();
    criterion_tree_eval_oracle();
    criterion_budget(work);

    std::vector<fs::path> run_dirs(3);
    criterion_mgs(work, run_dirs[0]);
    classification_desk("WDB classification desk-scale", root / "data/wdb.csv",
                        work / "wdb_run", 0.90, 30 * 60, run_dirs[1]);
    classification_desk("PIM classification desk-scale", root / "data/pim.csv",
                        work / "pim_run", 0.65, 0, run_dirs[2]);

    criterion_ensemble_no_regression(run_dirs);
    criterion_single_vs_multi(work);
    criterion_property_suites(work);

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
