#pragma once

#include <span>
#include <string>
#include <vector>

#include "fednam/dataset.hpp"
#include "fednam/mlp.hpp"
#include "fednam/param_vector.hpp"
#include "fednam/rng.hpp"

namespace fednam {

// Per-client optimizer settings; the round driver reads batch_size from
// here while learning rate and epoch count arrive per round.
struct LocalOpt {
    double learning_rate = 0.01;
    int batch_size = 32;
    int epochs = 1;
};

// One simulated client: its data shard, its model replica, and a
// private generator for batch shuffling.
struct ClientState {
    int client_id = 0;
    Dataset shard;
    MlpModel model;
    LocalOpt opt;
    Rng rng;

    ClientState(int id, Dataset shard_, MlpModel model_, LocalOpt opt_, Rng rng_)
        : client_id(id), shard(std::move(shard_)), model(std::move(model_)),
          opt(opt_), rng(rng_) {}
};

struct LocalTrainResult {
    ParamVector params;
    std::vector<double> loss_trace;  // mean epoch loss, pre-update per batch
};

// Bookkeeping for one federated round. The slack is the measured
// quantity delta_t = L(w_{t+1}) - L(w_t) + lr * ||grad L(w_t)||^2; a
// smooth-enough objective keeps it small but nothing asserts its sign.
struct RoundRecord {
    int round = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    double grad_norm_sq = 0.0;
    double slack = 0.0;
    std::vector<double> client_losses;  // final-epoch mean loss per client
};

struct ServerState {
    ParamVector global_params;
    std::vector<RoundRecord> history;
};

// Plain minibatch SGD on the client's shard: seeded shuffle each epoch,
// contiguous batches, no momentum. Updates the client model in place
// and returns the new flat parameters with the per-epoch mean loss.
LocalTrainResult local_train(ClientState& client, int epochs, double learning_rate,
                             int batch_size);

// Elementwise arithmetic mean of identically laid-out parameter vectors.
ParamVector fedavg(std::span<const ParamVector> params);

// One synchronous round: broadcast the global params, train every
// client (concurrently when threads > 1), average, redistribute, and
// record the descent-audit fields measured on the union of all shards.
RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                      double learning_rate, int local_epochs, int threads = 1);

struct DescentAudit {
    std::vector<double> slacks;     // one per audited round
    double fraction_within = 0.0;   // share of rounds with slack <= tol
    double max_slack = 0.0;
    double tol = 0.0;
};

// Summarizes the measured slack across a run's history. Reports only;
// the descent inequality itself is not asserted because the smoothness
// constant it leans on is unknown for these models.
DescentAudit descent_audit(std::span<const RoundRecord> history, double tol);

// CSV export: round,loss_before,loss_after,grad_norm_sq,slack,client_0,...
void export_round_history(std::span<const RoundRecord> history, const std::string& path);

}  // namespace fednam
