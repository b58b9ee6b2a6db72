#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace attnpipe {

struct WorkerBusy {
    std::string endpoint;
    double busy_ms = 0.0;

    friend bool operator==(const WorkerBusy&, const WorkerBusy&) = default;
};

/// Per-frame stage durations in milliseconds. final_eval_ms is the busy time
/// of the slowest worker of the final stage.
struct TimingProfile {
    double io_ms = 0.0;
    double attention_wait_ms = 0.0;
    double client_processing_ms = 0.0;
    double transfer_ms = 0.0;
    double final_eval_ms = 0.0;
    double postprocess_ms = 0.0;
    std::vector<WorkerBusy> per_worker;

    friend bool operator==(const TimingProfile&, const TimingProfile&) = default;
};

/// Timing of one evaluation stage as reported by a crop evaluator.
struct StageTiming {
    double client_processing_ms = 0.0;
    double transfer_ms = 0.0;
    /// Slowest worker busy time.
    double eval_ms = 0.0;
    std::vector<WorkerBusy> per_worker;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}

    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

    void restart() { start_ = std::chrono::steady_clock::now(); }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace attnpipe
