#include "fednam/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "fednam/error.hpp"
#include "fednam/numkit.hpp"
#include "fednam/parallel.hpp"

namespace fednam {
namespace {

// Gathers shard rows into a dense batch for one minibatch step.
void fill_batch(const Dataset& shard, std::span<const std::size_t> indices,
                Matrix& batch, std::vector<int>& labels) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = shard.features.row(indices[i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
        labels[i] = shard.labels[indices[i]];
    }
}

// Union of every client's shard, in client order, for the round audit.
void build_union(const std::vector<ClientState>& clients, Matrix& features,
                 std::vector<int>& labels) {
    std::size_t total = 0;
    for (const auto& client : clients) total += client.shard.size();
    features = Matrix(total, clients.front().shard.dim());
    labels.resize(total);
    std::size_t cursor = 0;
    for (const auto& client : clients) {
        for (std::size_t i = 0; i < client.shard.size(); ++i) {
            const auto src = client.shard.features.row(i);
            std::copy(src.begin(), src.end(), features.row(cursor).begin());
            labels[cursor] = client.shard.labels[i];
            ++cursor;
        }
    }
}

}  // namespace

LocalTrainResult local_train(ClientState& client, int epochs, double learning_rate,
                             int batch_size) {
    if (epochs < 1) {
        throw ConfigError("local_train: epochs must be >= 1, got " + std::to_string(epochs));
    }
    if (batch_size < 1) {
        throw ConfigError("local_train: batch_size must be >= 1, got " +
                          std::to_string(batch_size));
    }
    const std::size_t n = client.shard.size();
    if (n == 0) {
        throw DataError("local_train: client " + std::to_string(client.client_id) +
                        " has an empty shard");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    LocalTrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        client.rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            const std::size_t take = std::min(static_cast<std::size_t>(batch_size), n - start);
            Matrix batch(take, client.shard.dim());
            std::vector<int> labels(take);
            fill_batch(client.shard, {order.data() + start, take}, batch, labels);

            BackwardResult step;
            try {
                step = client.model.backward(batch, labels);
            } catch (const DivergenceError& e) {
                throw DivergenceError("client " + std::to_string(client.client_id) +
                                      " diverged at epoch " + std::to_string(epoch) + ": " +
                                      e.what());
            }
            if (!std::isfinite(step.loss)) {
                throw DivergenceError("client " + std::to_string(client.client_id) +
                                      " diverged at epoch " + std::to_string(epoch) +
                                      ": loss = " + std::to_string(step.loss));
            }
            client.model.apply_gradient_step(step.param_grads, learning_rate);
            loss_sum += step.loss * static_cast<double>(take);
        }
        result.loss_trace.push_back(loss_sum / static_cast<double>(n));
    }
    result.params = client.model.to_params();
    return result;
}

ParamVector fedavg(std::span<const ParamVector> params) {
    if (params.empty()) {
        throw ConfigError("fedavg: need at least one parameter vector");
    }
    const std::size_t count = params.front().values.size();
    for (std::size_t k = 1; k < params.size(); ++k) {
        if (params[k].layout_hash != params.front().layout_hash ||
            params[k].values.size() != count) {
            throw DataError("fedavg: client " + std::to_string(k) +
                            " parameters do not match the first client's layout");
        }
    }

    // Per coordinate the client values are sorted and averaged as
    // offsets from the smallest one. Sorting makes the result
    // independent of client order and identical inputs average to
    // themselves exactly; the shift costs nothing in accuracy.
    ParamVector out;
    out.layout_hash = params.front().layout_hash;
    out.values.resize(count);
    std::vector<double> column(params.size());
    const double inv_k = 1.0 / static_cast<double>(params.size());
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < params.size(); ++k) column[k] = params[k].values[i];
        std::sort(column.begin(), column.end());
        double shifted_sum = 0.0;
        for (const double v : column) shifted_sum += v - column.front();
        out.values[i] = column.front() + shifted_sum * inv_k;
    }
    return out;
}

RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                      double learning_rate, int local_epochs, int threads) {
    if (clients.empty()) {
        throw ConfigError("run_round: no clients");
    }

    // Broadcast w_t so every replica starts the round identically.
    for (auto& client : clients) client.model.from_params(server.global_params);

    // Audit fields at w_t, measured on the union of all shards.
    Matrix union_features;
    std::vector<int> union_labels;
    build_union(clients, union_features, union_labels);
    const BackwardResult at_start = clients.front().model.backward(union_features,
                                                                   union_labels);
    double grad_norm_sq = 0.0;
    for (const double g : at_start.param_grads.values) grad_norm_sq += g * g;

    std::vector<LocalTrainResult> results(clients.size());
    parallel_for(clients.size(), threads, [&](std::size_t k) {
        results[k] = local_train(clients[k], local_epochs, learning_rate,
                                 clients[k].opt.batch_size);
    });

    std::vector<ParamVector> updates;
    updates.reserve(clients.size());
    for (auto& r : results) updates.push_back(std::move(r.params));
    server.global_params = fedavg(updates);

    // Redistribute w_{t+1} and measure the post-round loss on the union.
    for (auto& client : clients) client.model.from_params(server.global_params);
    const double loss_after =
        cross_entropy(softmax(clients.front().model.logits(union_features)), union_labels);

    RoundRecord record;
    record.round = static_cast<int>(server.history.size());
    record.loss_before = at_start.loss;
    record.loss_after = loss_after;
    record.grad_norm_sq = grad_norm_sq;
    record.slack = loss_after - at_start.loss + learning_rate * grad_norm_sq;
    record.client_losses.reserve(clients.size());
    for (const auto& r : results) record.client_losses.push_back(r.loss_trace.back());
    server.history.push_back(record);
    return record;
}

DescentAudit descent_audit(std::span<const RoundRecord> history, double tol) {
    if (history.size() < 2) {
        throw ConfigError("descent_audit: need at least 2 recorded rounds, got " +
                          std::to_string(history.size()));
    }
    DescentAudit audit;
    audit.tol = tol;
    audit.slacks.reserve(history.size());
    std::size_t within = 0;
    audit.max_slack = -std::numeric_limits<double>::infinity();
    for (const RoundRecord& record : history) {
        if (!std::isfinite(record.loss_before) || !std::isfinite(record.loss_after) ||
            !std::isfinite(record.grad_norm_sq)) {
            throw DataError("descent_audit: round " + std::to_string(record.round) +
                            " has unpopulated loss or gradient fields");
        }
        audit.slacks.push_back(record.slack);
        if (record.slack <= tol) ++within;
        audit.max_slack = std::max(audit.max_slack, record.slack);
    }
    audit.fraction_within = static_cast<double>(within) / static_cast<double>(history.size());
    return audit;
}

void export_round_history(std::span<const RoundRecord> history, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    std::size_t max_clients = 0;
    for (const auto& r : history) max_clients = std::max(max_clients, r.client_losses.size());
    out << "round,loss_before,loss_after,grad_norm_sq,slack";
    for (std::size_t k = 0; k < max_clients; ++k) out << ",client_" << k;
    out << "\n";
    char buf[32];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << "," << buf;
    };
    for (const auto& r : history) {
        out << r.round;
        put(r.loss_before);
        put(r.loss_after);
        put(r.grad_norm_sq);
        put(r.slack);
        for (const double loss : r.client_losses) put(loss);
        out << "\n";
    }
    if (!out) {
        throw IoError("write failure on '" + path + "'");
    }
}

}  // namespace fednam
