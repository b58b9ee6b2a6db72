#include "attnpipe/simulator.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <queue>
#include <stdexcept>

#include "attnpipe/distribution.hpp"

namespace attnpipe {

void validate(const SimScenario& scenario) {
    if (scenario.frames.empty()) {
        throw std::invalid_argument("scenario has no frames");
    }
    if (!(scenario.per_crop_cost_ms > 0.0)) {
        throw std::invalid_argument("per-crop cost must be positive");
    }
    if (scenario.transfer_cost_per_crop_ms < 0.0) {
        throw std::invalid_argument("transfer cost must be >= 0");
    }
    for (const auto& f : scenario.frames) {
        if (f.attention_crops < 0 || f.final_crops < 0) {
            throw std::invalid_argument("crop counts must be >= 0");
        }
    }
    if (scenario.n_final.empty() || scenario.n_attention.empty()) {
        throw std::invalid_argument("scenario needs N_A and N_F values to sweep");
    }
    for (const int n : scenario.n_final) {
        if (n < 1) {
            throw std::invalid_argument("N_F must be >= 1");
        }
    }
    for (const int n : scenario.n_attention) {
        if (n < 0) {
            throw std::invalid_argument("N_A must be >= 0");
        }
    }
}

namespace {

enum class EventKind { arrived, finished };

struct Event {
    double time;
    EventKind kind;
    std::size_t worker;

    bool operator>(const Event& o) const {
        if (time != o.time) {
            return time > o.time;
        }
        return worker > o.worker;
    }
};

}  // namespace

SimStage simulate_stage(double start_ms, int crops, int workers, double per_crop_cost_ms,
                        double transfer_cost_per_crop_ms) {
    SimStage stage;
    stage.start_ms = start_ms;
    stage.end_ms = start_ms;
    stage.worker_busy_ms.assign(static_cast<std::size_t>(workers), 0.0);
    if (crops <= 0) {
        return stage;
    }
    const auto chunks = dispatch(static_cast<std::size_t>(crops), static_cast<std::size_t>(workers));

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;

    // uplink shared fairly between all chunks still in transfer
    std::vector<double> remaining(chunks.size());
    std::vector<std::size_t> sending;
    for (std::size_t w = 0; w < chunks.size(); ++w) {
        if (chunks[w].count > 0) {
            remaining[w] = static_cast<double>(chunks[w].count) * transfer_cost_per_crop_ms;
            sending.push_back(w);
        }
    }
    double now = start_ms;
    while (!sending.empty()) {
        double least = remaining[sending.front()];
        for (const auto w : sending) {
            least = std::min(least, remaining[w]);
        }
        now += least * static_cast<double>(sending.size());
        std::vector<std::size_t> still;
        for (const auto w : sending) {
            remaining[w] -= least;
            if (remaining[w] <= 1e-12) {
                events.push(Event{now, EventKind::arrived, w});
            } else {
                still.push_back(w);
            }
        }
        sending.swap(still);
    }

    while (!events.empty()) {
        const Event e = events.top();
        events.pop();
        if (e.kind == EventKind::arrived) {
            const double done = e.time + static_cast<double>(chunks[e.worker].count) * per_crop_cost_ms;
            events.push(Event{done, EventKind::finished, e.worker});
        } else {
            stage.worker_busy_ms[e.worker] = e.time - start_ms;
            stage.end_ms = std::max(stage.end_ms, e.time);
        }
    }
    return stage;
}

std::vector<SimFrameTrace> simulate_stream(const SimScenario& scenario, int n_attention, int n_final) {
    validate(scenario);
    const double c = scenario.per_crop_cost_ms;
    const double tau = scenario.transfer_cost_per_crop_ms;
    std::vector<SimFrameTrace> trace;
    trace.reserve(scenario.frames.size());
    for (std::size_t t = 0; t < scenario.frames.size(); ++t) {
        const auto& f = scenario.frames[t];
        const SimFrameTrace* prev = t == 0 ? nullptr : &trace.back();
        const double prev_final_end = prev ? prev->final_stage.end_ms : 0.0;
        SimFrameTrace cur;
        if (n_attention > 0) {
            // one frame of lookahead: attention for t may begin once final(t-1) has begun
            const double att_start = prev ? std::max(prev->attention.end_ms, prev->final_stage.start_ms) : 0.0;
            cur.attention = simulate_stage(att_start, f.attention_crops, n_attention, c, tau);
            const double final_start = std::max(prev_final_end, cur.attention.end_ms);
            cur.attention_wait_ms = final_start - prev_final_end;
            cur.final_stage = simulate_stage(final_start, f.final_crops, n_final, c, tau);
        } else {
            cur.attention = simulate_stage(prev_final_end, f.attention_crops, n_final, c, tau);
            cur.attention_wait_ms = cur.attention.duration_ms();
            cur.final_stage = simulate_stage(cur.attention.end_ms, f.final_crops, n_final, c, tau);
        }
        cur.latency_ms = cur.final_stage.end_ms - prev_final_end;
        trace.push_back(std::move(cur));
    }
    return trace;
}

std::vector<SimRow> simulate_scaling(const SimScenario& scenario) {
    validate(scenario);
    std::vector<SimRow> rows;
    for (const int na : scenario.n_attention) {
        for (const int nf : scenario.n_final) {
            const auto trace = simulate_stream(scenario, na, nf);
            SimRow row;
            row.n_attention = na;
            row.n_final = nf;
            double steady = 0.0;
            for (std::size_t i = 0; i < trace.size(); ++i) {
                row.mean_latency_ms += trace[i].latency_ms;
                row.mean_attention_stage_ms += trace[i].attention.duration_ms();
                row.mean_final_stage_ms += trace[i].final_stage.duration_ms();
                row.mean_attention_wait_ms += trace[i].attention_wait_ms;
                if (i > 0) {
                    steady += trace[i].latency_ms;
                }
            }
            const auto n = static_cast<double>(trace.size());
            row.mean_latency_ms /= n;
            row.mean_attention_stage_ms /= n;
            row.mean_final_stage_ms /= n;
            row.mean_attention_wait_ms /= n;
            row.steady_latency_ms = trace.size() > 1 ? steady / (n - 1) : row.mean_latency_ms;
            rows.push_back(row);
        }
    }
    return rows;
}

void write_sim_csv(std::ostream& os, const std::vector<SimRow>& rows) {
    os << "n_attention,n_final,mean_latency_ms,steady_latency_ms,mean_attention_stage_ms,mean_final_stage_ms,"
          "mean_attention_wait_ms\n";
    os << std::fixed << std::setprecision(6);
    for (const auto& r : rows) {
        os << r.n_attention << ',' << r.n_final << ',' << r.mean_latency_ms << ',' << r.steady_latency_ms << ','
           << r.mean_attention_stage_ms << ',' << r.mean_final_stage_ms << ',' << r.mean_attention_wait_ms << '\n';
    }
}

}  // namespace attnpipe
