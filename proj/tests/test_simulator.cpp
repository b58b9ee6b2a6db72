#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "attnpipe/simulator.hpp"

using namespace attnpipe;

namespace {

double closed_form(int k, int n, double c, double tau) {
    return std::ceil(static_cast<double>(k) / n) * c + k * tau;
}

SimScenario uniform(int frames, int att, int fin, double c, double tau) {
    SimScenario s;
    s.frames.assign(static_cast<std::size_t>(frames), SimFrame{att, fin});
    s.per_crop_cost_ms = c;
    s.transfer_cost_per_crop_ms = tau;
    return s;
}

}  // namespace

TEST_CASE("stage latency matches the closed form") {
    for (int k = 0; k <= 40; ++k) {
        for (int n = 1; n <= 16; ++n) {
            for (double tau : {0.0, 0.1, 0.7}) {
                const auto st = simulate_stage(5.0, k, n, 3.0, tau);
                CHECK(st.start_ms == 5.0);
                CHECK(st.duration_ms() == doctest::Approx(k == 0 ? 0.0 : closed_form(k, n, 3.0, tau)));
                double busiest = 0.0;
                for (double b : st.worker_busy_ms) {
                    busiest = std::max(busiest, b);
                }
                CHECK(busiest == doctest::Approx(st.duration_ms()));
            }
        }
    }
}

TEST_CASE("doubling workers below saturation halves the final stage") {
    for (int n : {1, 2, 4}) {
        const auto a = simulate_stage(0, 16, n, 2.0, 0.0).duration_ms();
        const auto b = simulate_stage(0, 16, 2 * n, 2.0, 0.0).duration_ms();
        CHECK(b == doctest::Approx(a / 2));
    }
}

TEST_CASE("latency is non-increasing in N_F and flat past the crop count") {
    auto s = uniform(10, 2, 12, 4.0, 0.05);
    s.n_attention = {1};
    s.n_final = {};
    for (int n = 1; n <= 24; ++n) {
        s.n_final.push_back(n);
    }
    const auto rows = simulate_scaling(s);
    REQUIRE(rows.size() == 24);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].steady_latency_ms <= rows[i - 1].steady_latency_ms + 1e-9);
        if (rows[i - 1].n_final >= 12) {
            CHECK(rows[i].steady_latency_ms == doctest::Approx(rows[i - 1].steady_latency_ms));
            CHECK(rows[i].mean_final_stage_ms == doctest::Approx(closed_form(12, 12, 4.0, 0.05)));
        }
    }
}

TEST_CASE("pipelining hides attention when it is cheaper than the final stage") {
    const auto s = uniform(20, 2, 8, 1.0, 0.0);
    for (int nf : {1, 2, 4}) {
        const auto overlapped = simulate_stream(s, 1, nf);
        const auto sequential = simulate_stream(s, 0, nf);
        const double att = overlapped[1].attention.duration_ms();
        const double fin = overlapped[1].final_stage.duration_ms();
        REQUIRE(att <= fin);
        for (std::size_t t = 1; t < overlapped.size(); ++t) {
            CHECK(overlapped[t].latency_ms == doctest::Approx(fin));
            CHECK(overlapped[t].attention_wait_ms == doctest::Approx(0.0));
            CHECK(overlapped[t].latency_ms >= std::max(att, fin) - 1e-9);
            CHECK(overlapped[t].latency_ms <= sequential[t].latency_ms + 1e-9);
            CHECK(sequential[t].latency_ms == doctest::Approx(sequential[t].attention.duration_ms() + fin));
        }
    }
}

TEST_CASE("slow attention shows up as wait") {
    const auto s = uniform(10, 8, 2, 1.0, 0.0);
    const auto tr = simulate_stream(s, 1, 2);
    // attention 8, final 1: steady latency bounded by attention
    CHECK(tr.back().latency_ms == doctest::Approx(8.0));
    CHECK(tr.back().attention_wait_ms == doctest::Approx(7.0));
}

TEST_CASE("scenario validation and csv") {
    SimScenario bad;
    CHECK_THROWS(validate(bad));
    auto s = uniform(2, 1, 1, 1.0, 0.0);
    s.per_crop_cost_ms = 0.0;
    CHECK_THROWS(validate(s));
    s = uniform(2, 1, 1, 1.0, 0.0);
    s.n_final = {0};
    CHECK_THROWS(validate(s));
    s = uniform(3, 1, 4, 1.0, 0.0);
    std::ostringstream os;
    write_sim_csv(os, simulate_scaling(s));
    const auto text = os.str();
    CHECK(text.rfind("n_attention,n_final,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 4);
    CHECK(simulate_scaling(s).front().mean_latency_ms == simulate_scaling(s).front().mean_latency_ms);
}
