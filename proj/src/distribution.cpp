#include "attnpipe/distribution.hpp"

#include <algorithm>
#include <exception>
#include <future>

namespace attnpipe {

void validate(const ClusterConfig& cluster) {
    if (cluster.final_workers.empty()) {
        throw ConfigError("cluster needs at least one final worker");
    }
    if (cluster.request_timeout.count() <= 0) {
        throw ConfigError("request timeout must be positive");
    }
}

std::vector<Chunk> dispatch(std::size_t items, std::size_t workers) {
    if (workers == 0) {
        throw std::invalid_argument("dispatch needs at least one worker");
    }
    std::vector<Chunk> chunks(workers);
    const std::size_t base = items / workers;
    const std::size_t extra = items % workers;
    std::size_t at = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        chunks[w].begin = at;
        chunks[w].count = base + (w < extra ? 1 : 0);
        at += chunks[w].count;
    }
    return chunks;
}

RemoteEvaluator::RemoteEvaluator(std::vector<Endpoint> workers, std::chrono::milliseconds timeout) {
    if (workers.empty()) {
        throw ConfigError("remote evaluator needs at least one worker");
    }
    for (auto& ep : workers) {
        clients_.push_back(std::make_unique<WorkerClient>(std::move(ep), timeout));
    }
}

void RemoteEvaluator::check_health() {
    for (auto& c : clients_) {
        c->health();
    }
}

std::vector<CropResult> RemoteEvaluator::evaluate(long frame_id, std::span<const Tile> tiles, StageTiming& timing) {
    struct Outcome {
        std::vector<CropResult> results;
        double busy_ms = 0.0;
        double send_ms = 0.0;
    };
    const auto chunks = dispatch(tiles.size(), clients_.size());
    std::vector<std::future<Outcome>> pending(clients_.size());
    for (std::size_t w = 0; w < clients_.size(); ++w) {
        if (chunks[w].count == 0) {
            continue;
        }
        const auto part = tiles.subspan(chunks[w].begin, chunks[w].count);
        auto* client = clients_[w].get();
        pending[w] = std::async(std::launch::async, [client, part, frame_id] {
            Outcome o;
            Stopwatch busy;
            o.results = client->evaluate(frame_id, part, &o.send_ms);
            o.busy_ms = busy.elapsed_ms();
            return o;
        });
    }

    // gather everything before reporting, so no request is left in flight
    std::vector<Outcome> outcomes(clients_.size());
    std::exception_ptr failure;
    for (std::size_t w = 0; w < clients_.size(); ++w) {
        if (!pending[w].valid()) {
            continue;
        }
        try {
            outcomes[w] = pending[w].get();
        } catch (...) {
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::vector<CropResult> out;
    out.reserve(tiles.size());
    timing.per_worker.clear();
    timing.eval_ms = 0.0;
    timing.transfer_ms = 0.0;
    for (std::size_t w = 0; w < clients_.size(); ++w) {
        auto& o = outcomes[w];
        timing.per_worker.push_back(WorkerBusy{clients_[w]->endpoint().str(), o.busy_ms});
        if (o.busy_ms >= timing.eval_ms && chunks[w].count > 0) {
            timing.eval_ms = o.busy_ms;
            timing.transfer_ms = o.send_ms;
        }
        std::move(o.results.begin(), o.results.end(), std::back_inserter(out));
    }
    return out;
}

namespace {

struct Prepared {
    StreamFrame frame;
    AttentionModel attention;
    double io_ms = 0.0;
    double attention_ms = 0.0;
};

Prepared prepare(std::size_t index, const FrameLoader& load, const PipelineSettings& settings,
                 CropEvaluator& evaluator) {
    Prepared p;
    Stopwatch io;
    p.frame = load(index);
    p.io_ms = io.elapsed_ms();
    Stopwatch att;
    StageTiming timing;
    try {
        p.attention = attention_pass(p.frame.pixels, p.frame.frame_id, settings, evaluator, timing);
    } catch (const std::exception& e) {
        throw StageError("attention", p.frame.frame_id, e.what());
    }
    p.attention_ms = att.elapsed_ms();
    return p;
}

}  // namespace

std::vector<FrameResult> run_stream(std::size_t count, const FrameLoader& load, const PipelineSettings& settings,
                                    CropEvaluator& attention, CropEvaluator& final_stage, StreamOptions options) {
    validate(settings);
    std::vector<FrameResult> out;
    if (options.start >= count) {
        return out;
    }
    const bool overlap = options.overlap && &attention != &final_stage;
    AttentionHistory history(settings.temporal_window);
    std::size_t cursor = options.start;
    std::future<Prepared> next;
    try {
        Prepared current = prepare(cursor, load, settings, attention);
        double wait_ms = current.attention_ms;
        for (std::size_t i = options.start; i < count; ++i) {
            cursor = i;
            if (overlap && i + 1 < count) {
                next = std::async(std::launch::async,
                                  [&, i] { return prepare(i + 1, load, settings, attention); });
            }
            history.push(current.attention);
            auto result = complete_frame(current.frame.pixels, current.frame.frame_id, settings, history.merged(),
                                         final_stage);
            result.timing.io_ms = current.io_ms;
            result.timing.attention_wait_ms = wait_ms;
            out.push_back(std::move(result));

            if (i + 1 < count) {
                cursor = i + 1;
                if (overlap) {
                    Stopwatch waiting;
                    current = next.get();
                    wait_ms = waiting.elapsed_ms();
                } else {
                    current = prepare(i + 1, load, settings, attention);
                    wait_ms = current.attention_ms;
                }
            }
        }
    } catch (const std::exception& e) {
        if (next.valid()) {
            next.wait();
        }
        throw StreamError(cursor, std::move(out), e.what());
    }
    return out;
}

std::vector<FrameResult> run_stream(std::size_t count, const FrameLoader& load, const PipelineSettings& settings,
                                    const ClusterConfig& cluster, std::size_t start) {
    validate(cluster);
    RemoteEvaluator final_stage(cluster.final_workers, cluster.request_timeout);
    if (cluster.attention_workers.empty()) {
        return run_stream(count, load, settings, final_stage, final_stage, StreamOptions{false, start});
    }
    RemoteEvaluator attention(cluster.attention_workers, cluster.request_timeout);
    return run_stream(count, load, settings, attention, final_stage, StreamOptions{true, start});
}

}  // namespace attnpipe
