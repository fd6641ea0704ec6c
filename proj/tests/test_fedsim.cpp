#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fednam/error.hpp"
#include "fednam/fedsim.hpp"
#include "fednam/idx.hpp"
#include "fednam/numkit.hpp"
#include "fednam/synth.hpp"

using namespace fednam;

namespace {

ClientState make_client(int id, const Dataset& shard, const std::vector<int>& dims,
                        std::uint64_t model_seed, std::uint64_t shuffle_seed,
                        LocalOpt opt = {}) {
    Rng init(model_seed);
    return ClientState(id, shard, MlpModel::he_init(dims, init), opt, Rng(shuffle_seed));
}

// Three equal IID clients over a synthetic two-class problem.
std::vector<ClientState> synth_clients(std::uint64_t seed, std::size_t n = 120) {
    const SynthDataset synth = synth_classification(n, 2, 2, seed);
    const PartitionPlan plan = partition_iid(synth.dataset, 3, seed);
    std::vector<ClientState> clients;
    for (int k = 0; k < 3; ++k) {
        clients.push_back(make_client(k, subset(synth.dataset, plan.shards[k]),
                                      {2, 8, 2}, 100, 200 + static_cast<std::uint64_t>(k)));
    }
    return clients;
}

double full_loss(const MlpModel& model, const Dataset& data) {
    return cross_entropy(softmax(model.logits(data.features)), data.labels);
}

double test_accuracy(const MlpModel& model, const Dataset& data) {
    const std::vector<int> preds = predict_labels(model, data.features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace

TEST_CASE("local_train: zero epochs is rejected, zero learning rate is a no-op") {
    const SynthDataset synth = synth_classification(20, 2, 2, 1);
    ClientState client = make_client(0, synth.dataset, {2, 4, 2}, 7, 8);
    CHECK_THROWS_AS((void)local_train(client, 0, 0.1, 8), ConfigError);
    CHECK_THROWS_AS((void)local_train(client, 1, 0.1, 0), ConfigError);

    const ParamVector before = client.model.to_params();
    const double initial_loss = full_loss(client.model, client.shard);
    const LocalTrainResult result = local_train(client, 1, 0.0, 8);
    CHECK(result.params.values == before.values);
    REQUIRE(result.loss_trace.size() == 1);
    CHECK(result.loss_trace[0] == doctest::Approx(initial_loss).epsilon(1e-12));
}

TEST_CASE("local_train: full-batch descent on a separable toy is monotone") {
    const SynthDataset synth = synth_classification(80, 2, 2, 3);
    ClientState client = make_client(0, synth.dataset, {2, 2}, 11, 12);
    const LocalTrainResult result =
        local_train(client, 10, 0.1, static_cast<int>(synth.dataset.size()));
    REQUIRE(result.loss_trace.size() == 10);
    for (std::size_t e = 1; e < result.loss_trace.size(); ++e) {
        CHECK(result.loss_trace[e] < result.loss_trace[e - 1]);
    }
}

TEST_CASE("local_train: same seed and data give bit-identical parameters") {
    const SynthDataset synth = synth_classification(40, 3, 2, 5);
    ClientState a = make_client(0, synth.dataset, {3, 6, 2}, 21, 22);
    ClientState b = make_client(0, synth.dataset, {3, 6, 2}, 21, 22);
    const LocalTrainResult ra = local_train(a, 3, 0.05, 8);
    const LocalTrainResult rb = local_train(b, 3, 0.05, 8);
    CHECK(ra.params.values == rb.params.values);
    CHECK(ra.loss_trace == rb.loss_trace);
}

TEST_CASE("local_train: a non-finite loss aborts with the client id") {
    const SynthDataset synth = synth_classification(10, 2, 2, 9);
    ClientState client = make_client(3, synth.dataset, {2, 4, 2}, 31, 32);
    client.model.mutable_layer_weights(0)(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS((void)local_train(client, 1, 0.1, 4),
                         doctest::Contains("client 3"), DivergenceError);
}

TEST_CASE("fedavg: the worked three-vector mean is exact") {
    ParamVector a{{1.0, 2.0}, 42};
    ParamVector b{{3.0, 4.0}, 42};
    ParamVector c{{2.0, 0.0}, 42};
    const std::vector<ParamVector> params{a, b, c};
    const ParamVector mean = fedavg(params);
    CHECK(mean.values == std::vector<double>{2.0, 2.0});
    CHECK(mean.layout_hash == 42);
}

TEST_CASE("fedavg: identical vectors average to themselves bit-exactly") {
    // 0.1 and friends are awkward in binary; the mean must still return
    // them untouched.
    ParamVector theta{{0.1, 0.3, -0.7, 1e-300, 3.14159}, 7};
    const std::vector<ParamVector> params{theta, theta, theta};
    CHECK(fedavg(params).values == theta.values);
}

TEST_CASE("fedavg: result does not depend on client order") {
    Rng rng(44);
    std::vector<ParamVector> params;
    for (int k = 0; k < 5; ++k) {
        ParamVector p;
        p.layout_hash = 9;
        for (int i = 0; i < 50; ++i) p.values.push_back(rng.normal());
        params.push_back(std::move(p));
    }
    const ParamVector forward = fedavg(params);
    std::vector<ParamVector> reversed(params.rbegin(), params.rend());
    CHECK(fedavg(reversed).values == forward.values);
}

TEST_CASE("fedavg: matches the brute-force sum within 1e-12") {
    Rng rng(45);
    std::vector<ParamVector> params;
    for (int k = 0; k < 7; ++k) {
        ParamVector p;
        p.layout_hash = 1;
        for (int i = 0; i < 100; ++i) p.values.push_back(rng.normal() * 10.0);
        params.push_back(std::move(p));
    }
    const ParamVector mean = fedavg(params);
    for (std::size_t i = 0; i < 100; ++i) {
        double sum = 0.0;
        for (const auto& p : params) sum += p.values[i];
        CHECK(mean.values[i] == doctest::Approx(sum / 7.0).epsilon(1e-12));
    }
}

TEST_CASE("fedavg: layout mismatch and empty input are rejected") {
    ParamVector a{{1.0}, 1};
    ParamVector b{{2.0}, 2};
    const std::vector<ParamVector> mismatched{a, b};
    CHECK_THROWS_AS((void)fedavg(mismatched), DataError);
    CHECK_THROWS_AS((void)fedavg(std::span<const ParamVector>{}), ConfigError);
}

TEST_CASE("run_round: one client with a full batch is exactly local_train") {
    const SynthDataset synth = synth_classification(30, 2, 2, 13);
    const int n = static_cast<int>(synth.dataset.size());
    LocalOpt opt{0.05, n, 1};

    std::vector<ClientState> clients;
    clients.push_back(make_client(0, synth.dataset, {2, 4, 2}, 51, 52, opt));
    ServerState server{clients[0].model.to_params(), {}};
    (void)run_round(server, clients, 0.05, 2);

    ClientState solo = make_client(0, synth.dataset, {2, 4, 2}, 51, 52, opt);
    const LocalTrainResult direct = local_train(solo, 2, 0.05, n);
    CHECK(server.global_params.values == direct.params.values);
}

TEST_CASE("run_round: identical clients leave the average at either client's params") {
    const SynthDataset synth = synth_classification(24, 2, 2, 17);
    LocalOpt opt{0.05, 8, 1};
    std::vector<ClientState> clients;
    clients.push_back(make_client(0, synth.dataset, {2, 4, 2}, 61, 62, opt));
    clients.push_back(make_client(1, synth.dataset, {2, 4, 2}, 61, 62, opt));
    ServerState server{clients[0].model.to_params(), {}};
    (void)run_round(server, clients, 0.05, 1);

    ClientState solo = make_client(0, synth.dataset, {2, 4, 2}, 61, 62, opt);
    const LocalTrainResult direct = local_train(solo, 1, 0.05, 8);
    CHECK(server.global_params.values == direct.params.values);
}

TEST_CASE("run_round: every client holds the server params after the round") {
    std::vector<ClientState> clients = synth_clients(19);
    ServerState server{clients[0].model.to_params(), {}};
    for (int t = 0; t < 3; ++t) {
        (void)run_round(server, clients, 0.05, 1, 3);
        for (const auto& client : clients) {
            CHECK(client.model.to_params().values == server.global_params.values);
        }
    }
    CHECK(server.history.size() == 3);
}

TEST_CASE("run_round: the slack field satisfies its defining identity") {
    std::vector<ClientState> clients = synth_clients(23);
    ServerState server{clients[0].model.to_params(), {}};
    const double lr = 0.05;
    for (int t = 0; t < 4; ++t) (void)run_round(server, clients, lr, 1);
    for (const RoundRecord& r : server.history) {
        const double identity = r.loss_after - r.loss_before + lr * r.grad_norm_sq;
        CHECK(std::abs(r.slack - identity) <= 1e-12);
        CHECK(std::isfinite(r.loss_before));
        CHECK(std::isfinite(r.loss_after));
    }
}

TEST_CASE("run_round: zero learning rate gives exactly zero slack") {
    std::vector<ClientState> clients = synth_clients(29);
    ServerState server{clients[0].model.to_params(), {}};
    const RoundRecord r0 = run_round(server, clients, 0.0, 1);
    const RoundRecord r1 = run_round(server, clients, 0.0, 2);
    CHECK(r0.slack == 0.0);
    CHECK(r1.slack == 0.0);
    CHECK(r0.loss_before == r0.loss_after);
}

TEST_CASE("run_round: results are identical across thread counts") {
    std::vector<ClientState> serial_clients = synth_clients(37);
    ServerState serial_server{serial_clients[0].model.to_params(), {}};
    std::vector<ClientState> parallel_clients = synth_clients(37);
    ServerState parallel_server{parallel_clients[0].model.to_params(), {}};
    for (int t = 0; t < 2; ++t) {
        (void)run_round(serial_server, serial_clients, 0.05, 2, 1);
        (void)run_round(parallel_server, parallel_clients, 0.05, 2, 3);
    }
    CHECK(serial_server.global_params.values == parallel_server.global_params.values);
}

TEST_CASE("run_round: a diverging client aborts the round naming the client") {
    std::vector<ClientState> clients = synth_clients(41);
    ServerState server{clients[0].model.to_params(), {}};
    server.global_params.values[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)run_round(server, clients, 0.05, 1, 3), DivergenceError);
}

TEST_CASE("descent_audit: logistic toy at lr 0.01 keeps slack under 1e-3") {
    // Single client, no hidden layer, full batch: smooth convex descent.
    const SynthDataset synth = synth_classification(200, 2, 2, 47);
    const int n = static_cast<int>(synth.dataset.size());
    LocalOpt opt{0.01, n, 1};
    std::vector<ClientState> clients;
    clients.push_back(make_client(0, synth.dataset, {2, 2}, 71, 72, opt));
    ServerState server{clients[0].model.to_params(), {}};
    for (int t = 0; t < 50; ++t) (void)run_round(server, clients, 0.01, 1);

    const DescentAudit audit = descent_audit(server.history, 1e-3);
    CHECK(audit.slacks.size() == 50);
    CHECK(audit.fraction_within >= 0.9);
}

TEST_CASE("descent_audit: too little history or unpopulated fields are rejected") {
    std::vector<RoundRecord> history(1);
    CHECK_THROWS_AS((void)descent_audit(history, 1e-3), ConfigError);
    history.resize(3);
    history[1].grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)descent_audit(history, 1e-3), DataError);
}

TEST_CASE("descent_audit: the within-tolerance fraction counts correctly") {
    std::vector<RoundRecord> history(4);
    history[0].slack = 5e-4;
    history[1].slack = 2e-3;
    history[2].slack = -1.0;
    history[3].slack = 1e-3;  // boundary counts as within
    const DescentAudit audit = descent_audit(history, 1e-3);
    CHECK(audit.fraction_within == doctest::Approx(0.75));
    CHECK(audit.max_slack == doctest::Approx(2e-3));
}

TEST_CASE("export_round_history writes one row per round plus a header") {
    std::vector<ClientState> clients = synth_clients(53);
    ServerState server{clients[0].model.to_params(), {}};
    for (int t = 0; t < 2; ++t) (void)run_round(server, clients, 0.05, 1);
    export_round_history(server.history, "round_history_test.csv");

    std::ifstream in("round_history_test.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "round,loss_before,loss_after,grad_norm_sq,slack,client_0,client_1,client_2");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 2);
    in.close();
    std::remove("round_history_test.csv");
}

TEST_CASE("three-client digit-subset run improves test accuracy each round") {
    // Seed 404 recorded with this configuration: a 3-round run on 600
    // training digits is short enough that each aggregation still moves
    // the global model forward. Determinism keeps the trace stable.
    const Dataset train = read_idx(std::string(FEDNAM_DATA_DIR) + "/train-images-idx3-ubyte",
                                   std::string(FEDNAM_DATA_DIR) + "/train-labels-idx1-ubyte");
    const Dataset test = read_idx(std::string(FEDNAM_DATA_DIR) + "/t10k-images-idx3-ubyte",
                                  std::string(FEDNAM_DATA_DIR) + "/t10k-labels-idx1-ubyte");
    std::vector<std::size_t> train_idx(600), test_idx(300);
    for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
    for (std::size_t i = 0; i < test_idx.size(); ++i) test_idx[i] = i;
    const Dataset train_small = subset(train, train_idx);
    const Dataset test_small = subset(test, test_idx);

    const PartitionPlan plan = partition_iid(train_small, 3, 404);
    LocalOpt opt{0.05, 32, 1};
    std::vector<ClientState> clients;
    Rng init(404);
    MlpModel global = MlpModel::he_init({784, 32, 10}, init);
    for (int k = 0; k < 3; ++k) {
        clients.push_back(ClientState(k, subset(train_small, plan.shards[k]), global, opt,
                                      Rng(404 + static_cast<std::uint64_t>(k + 1))));
    }
    ServerState server{global.to_params(), {}};

    std::vector<double> accuracy;
    for (int t = 0; t < 3; ++t) {
        (void)run_round(server, clients, 0.05, 1, 3);
        global.from_params(server.global_params);
        accuracy.push_back(test_accuracy(global, test_small));
    }
    REQUIRE(accuracy.size() == 3);
    CHECK(accuracy[1] > accuracy[0]);
    CHECK(accuracy[2] > accuracy[1]);
}
