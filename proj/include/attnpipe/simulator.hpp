#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attnpipe {

struct SimFrame {
    int attention_crops = 0;
    int final_crops = 0;
};

/// Cost model for the scaling simulator. Tiles of one stage share the
/// client uplink fairly (each crop needs transfer_cost_per_crop_ms of link
/// time); a worker starts once its whole chunk has arrived and spends
/// per_crop_cost_ms on each crop.
struct SimScenario {
    std::vector<SimFrame> frames;
    double per_crop_cost_ms = 1.0;
    double transfer_cost_per_crop_ms = 0.0;
    std::vector<int> n_attention{0, 1};
    std::vector<int> n_final{1, 2, 4, 8};
};

/// Throws std::invalid_argument.
void validate(const SimScenario& scenario);

struct SimStage {
    double start_ms = 0.0;
    double end_ms = 0.0;
    std::vector<double> worker_busy_ms;

    double duration_ms() const { return end_ms - start_ms; }
};

/// Timeline of one frame in a simulated stream.
struct SimFrameTrace {
    SimStage attention;
    SimStage final_stage;
    /// Time the final workers sat idle waiting for this frame's attention.
    double attention_wait_ms = 0.0;
    /// Distance between this frame's and the previous frame's completion.
    double latency_ms = 0.0;
};

/// Event-driven simulation of one stage of `crops` crops on `workers`
/// workers starting at start_ms.
SimStage simulate_stage(double start_ms, int crops, int workers, double per_crop_cost_ms,
                        double transfer_cost_per_crop_ms);

/// Stream with n_attention dedicated attention workers (0 = attention
/// inline on the final workers) and n_final final workers.
std::vector<SimFrameTrace> simulate_stream(const SimScenario& scenario, int n_attention, int n_final);

struct SimRow {
    int n_attention = 0;
    int n_final = 0;
    double mean_latency_ms = 0.0;
    /// Mean latency over frames after the first.
    double steady_latency_ms = 0.0;
    double mean_attention_stage_ms = 0.0;
    double mean_final_stage_ms = 0.0;
    double mean_attention_wait_ms = 0.0;
};

std::vector<SimRow> simulate_scaling(const SimScenario& scenario);

void write_sim_csv(std::ostream& os, const std::vector<SimRow>& rows);

}  // namespace attnpipe
