#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "attnpipe/error.hpp"
#include "attnpipe/net.hpp"
#include "attnpipe/pipeline.hpp"
#include "attnpipe/worker.hpp"

namespace attnpipe {

struct ClusterConfig {
    std::vector<Endpoint> attention_workers;
    std::vector<Endpoint> final_workers;
    std::chrono::milliseconds request_timeout = kDefaultRequestTimeout;
};

void validate(const ClusterConfig& cluster);

/// Contiguous chunk [begin, begin + count) of the crop list for one worker.
struct Chunk {
    std::size_t begin = 0;
    std::size_t count = 0;
};

/// Splits `items` into `workers` contiguous chunks whose sizes differ by at
/// most one, larger chunks first. Idle workers get empty chunks.
std::vector<Chunk> dispatch(std::size_t items, std::size_t workers);

/// Evaluates tiles on a set of workers: uniform dispatch, concurrent
/// requests, stage time taken from the slowest worker.
class RemoteEvaluator : public CropEvaluator {
public:
    RemoteEvaluator(std::vector<Endpoint> workers, std::chrono::milliseconds timeout = kDefaultRequestTimeout);

    std::vector<CropResult> evaluate(long frame_id, std::span<const Tile> tiles, StageTiming& timing) override;

    /// HEALTH probe on every worker; throws on the first failure.
    void check_health();

private:
    std::vector<std::unique_ptr<WorkerClient>> clients_;
};

/// Supplies frame `index` of a stream: its id and pixels.
struct StreamFrame {
    long frame_id = 0;
    Raster pixels;
};
using FrameLoader = std::function<StreamFrame(std::size_t index)>;

/// Raised when a stream stops early. Frames before cursor() completed and
/// are kept; resuming at cursor() continues the stream.
class StreamError : public Error {
public:
    StreamError(std::size_t cursor, std::vector<FrameResult> completed, const std::string& cause)
        : Error("stream stopped at frame index " + std::to_string(cursor) + ": " + cause),
          cursor_(cursor),
          completed_(std::move(completed)) {}

    std::size_t cursor() const noexcept { return cursor_; }
    const std::vector<FrameResult>& completed() const noexcept { return completed_; }

private:
    std::size_t cursor_;
    std::vector<FrameResult> completed_;
};

struct StreamOptions {
    /// Precompute attention for frame t+1 while frame t is in its final stage.
    bool overlap = true;
    std::size_t start = 0;
};

/// Runs the pipeline over frames [start, count). With overlap, the attention
/// evaluator must be distinct from the final one. Results keep input order.
std::vector<FrameResult> run_stream(std::size_t count, const FrameLoader& load, const PipelineSettings& settings,
                                    CropEvaluator& attention, CropEvaluator& final_stage, StreamOptions options = {});

/// Remote variant: attention on cluster.attention_workers with one-frame
/// lookahead when there are any, otherwise inline on the final workers.
std::vector<FrameResult> run_stream(std::size_t count, const FrameLoader& load, const PipelineSettings& settings,
                                    const ClusterConfig& cluster, std::size_t start = 0);

}  // namespace attnpipe
