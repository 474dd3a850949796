#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ppls/bench.hpp"
#include "ppls/stiefel.hpp"

using namespace ppls;

namespace {

PplsParams shuffled_flipped(const PplsParams& truth, RngStream& rng) {
    PplsParams est = truth;
    est.W.col(0).swap(est.W.col(1));
    est.C.col(0).swap(est.C.col(1));
    std::swap(est.b(0), est.b(1));
    std::swap(est.theta_t2(0), est.theta_t2(1));
    est.W.col(0) = -est.W.col(0);
    est.C.col(0) = -est.C.col(0);
    (void)rng;
    return est;
}

}  // namespace

TEST_CASE("align_params") {
    RngStream rng(701);
    PplsParams truth = make_truth(10, 8, 3, 0.1, 0.1, 0.05, rng);

    SUBCASE("identity on itself") {
        AlignResult res = align_params(truth, truth);
        CHECK(res.mse_w == 0.0);
        CHECK(res.mse_c == 0.0);
        for (int i = 0; i < 3; ++i) CHECK(res.assignment[i] == i);
    }

    SUBCASE("column swap plus joint flip aligns to zero error") {
        PplsParams est = shuffled_flipped(truth, rng);
        AlignResult res = align_params(est, truth);
        CHECK(res.mse_w < 1e-28);
        CHECK(res.mse_c < 1e-28);
        CHECK(res.mse_b < 1e-28);
        CHECK(res.mse_sigma_t < 1e-28);
    }

    SUBCASE("alignment never loses to the identity assignment, exhaustively checked") {
        for (int trial = 0; trial < 10; ++trial) {
            RngStream local = rng.fork(trial);
            PplsParams a = make_truth(7, 6, 3, 0.1, 0.1, 0.05, local);
            PplsParams b = make_truth(7, 6, 3, 0.1, 0.1, 0.05, local);
            AlignResult res = align_params(a, b);
            double aligned_loading_mse = res.mse_w * 7 * 3 + res.mse_c * 6 * 3;
            double unaligned =
                (a.W - b.W).squaredNorm() + (a.C - b.C).squaredNorm();
            CHECK(aligned_loading_mse <= unaligned + 1e-12);

            // exhaustive oracle over all 3! permutations x 2^3 joint flips
            int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
            double best = 1e300;
            for (auto& perm : perms)
                for (int mask = 0; mask < 8; ++mask) {
                    double total = 0.0;
                    for (int j = 0; j < 3; ++j) {
                        double sign = (mask & (1 << j)) ? -1.0 : 1.0;
                        total += (sign * a.W.col(perm[j]) - b.W.col(j)).squaredNorm();
                        total += (sign * a.C.col(perm[j]) - b.C.col(j)).squaredNorm();
                    }
                    best = std::min(best, total);
                }
            CHECK(aligned_loading_mse == doctest::Approx(best).epsilon(1e-10));
        }
    }
}

TEST_CASE("study config parsing and defaults") {
    const std::string path = "test_study_config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "study = bias-floor\n";
        out << "trials = 7\n";
        out << "seed = 123\n";
    }
    StudyConfig config = parse_study_config(path);
    CHECK(config.study == "bias-floor");
    CHECK(config.trials == 7);
    CHECK(config.seed == 123);
    apply_study_defaults(config);
    CHECK(config.p == 50);
    CHECK(config.r == 5);
    CHECK(config.sigma_e2 == 0.5);
    std::remove(path.c_str());

    {
        std::ofstream out(path);
        out << "studyname = oops\n";
    }
    CHECK_THROWS_AS(parse_study_config(path), ConfigError);
    std::remove(path.c_str());

    StudyConfig bad;
    bad.study = "nonexistent";
    CHECK_THROWS_AS(run_study(bad), ConfigError);
}

TEST_CASE("bias-floor study reproduces the bias structure at reduced size") {
    StudyConfig config;
    config.study = "bias-floor";
    config.trials = 10;
    config.seed = 7;
    StudyResult result = run_study(config);

    // full-spectrum bias pinned near 8/50 = 0.16 for every N
    for (const char* tag : {"@N=500", "@N=2000", "@N=10000"}) {
        auto [mean_bias, sd] = result.summary.at(std::string("full_spectrum|bias") + tag);
        CHECK(std::abs(mean_bias - 0.160) < 0.02);
        auto [sub_bias, sub_sd] = result.summary.at(std::string("subspace|bias") + tag);
        CHECK(std::abs(sub_bias) < 0.01);
        (void)sd;
        (void)sub_sd;
    }
}

TEST_CASE("study tables are byte-identical across reruns") {
    StudyConfig config;
    config.study = "ppca-verify";
    config.trials = 5;
    config.seed = 11;
    StudyResult a = run_study(config);
    StudyResult b = run_study(config);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].method == b.rows[i].method);
        CHECK(a.rows[i].metric == b.rows[i].metric);
        CHECK(a.rows[i].value == b.rows[i].value);
    }

    // and the CSV artifacts match bit for bit
    std::filesystem::create_directories("bench_rerun_a");
    std::filesystem::create_directories("bench_rerun_b");
    write_study_csv(a, "bench_rerun_a");
    write_study_csv(b, "bench_rerun_b");
    auto slurp = [](const std::string& path) {
        std::ifstream in(path);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(slurp("bench_rerun_a/ppca-verify_long.csv") ==
          slurp("bench_rerun_b/ppca-verify_long.csv"));
    std::filesystem::remove_all("bench_rerun_a");
    std::filesystem::remove_all("bench_rerun_b");
}

TEST_CASE("parallel trials produce the same tables as sequential") {
    StudyConfig config;
    config.study = "ppca-verify";
    config.trials = 6;
    config.seed = 13;
    config.jobs = 1;
    StudyResult seq = run_study(config);
    config.jobs = 2;
    StudyResult par = run_study(config);
    REQUIRE(seq.rows.size() == par.rows.size());
    for (std::size_t i = 0; i < seq.rows.size(); ++i)
        CHECK(seq.rows[i].value == par.rows[i].value);
}

TEST_CASE("ppca-verify study: both routes agree to machine precision") {
    StudyConfig config;
    config.study = "ppca-verify";
    config.trials = 5;
    config.seed = 17;
    StudyResult result = run_study(config);
    auto [max_diff, sd] = result.summary.at("routes|max_abs_diff");
    CHECK(max_diff < 1e-12);
    (void)sd;
}
