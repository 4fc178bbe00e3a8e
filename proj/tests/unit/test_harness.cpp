#include <gtest/gtest.h>

#include "hpaxos/harness.hpp"
#include "list_cluster.hpp"

namespace hpaxos {
namespace {

ExperimentConfig quiet(std::uint64_t ops = 1000) {
    ExperimentConfig c;
    c.ops = ops;
    return c;
}

TEST(HarnessTest, CleanRunDecidesEverything) {
    ExperimentTrace trace;
    const auto report = run_experiment(quiet(), &trace);
    for (auto kind : kFaultKinds) {
        EXPECT_EQ(report.stats(kind).injected, 0u);
        EXPECT_EQ(report.stats(kind).detected, 0u);
    }
    EXPECT_EQ(report.decided, 1000u);
    EXPECT_FALSE(report.divergence);
    EXPECT_FALSE(report.lockup);
    EXPECT_TRUE(report.all_clean());
    EXPECT_EQ(exit_code(report), 0);
    for (const auto& o : report.outcomes) {
        EXPECT_EQ(o.status, ReplicaStatus::running);
        EXPECT_EQ(o.checksum, report.outcomes[0].checksum);
    }
    EXPECT_TRUE(trace.detections.empty());
    EXPECT_EQ(trace.workload.size(), 1000u);
}

TEST(HarnessTest, ZeroOpsIsValid) {
    const auto report = run_experiment(quiet(0));
    EXPECT_EQ(report.decided, 0u);
    EXPECT_FALSE(report.lockup);
}

TEST(HarnessTest, SingleReplicaCluster) {
    auto config = quiet(50);
    config.replicas = 1;
    const auto report = run_experiment(config);
    EXPECT_EQ(report.decided, 50u);
    EXPECT_TRUE(report.all_clean());
}

TEST(HarnessTest, CrashRestartConverges) {
    auto config = quiet(400);
    config.crash_restarts = 3;
    ExperimentTrace trace;
    const auto report = run_experiment(config, &trace);
    EXPECT_EQ(report.restarts, 3u);
    EXPECT_EQ(report.decided, 400u);
    EXPECT_FALSE(report.divergence);
    ASSERT_EQ(trace.final_states.size(), 3u);
    EXPECT_EQ(trace.final_states[0], trace.final_states[1]);
    EXPECT_EQ(trace.final_states[0], trace.final_states[2]);
}

TEST(HarnessTest, CorruptLogOnRestartHalts) {
    auto config = quiet(200);
    config.crash_restarts = 1;
    config.faults.storage_corrupt_prob = 1.0;
    const auto report = run_experiment(config);
    EXPECT_EQ(report.restarts, 1u);
    EXPECT_EQ(report.stats(FaultKind::storage).injected, 1u);
    EXPECT_EQ(report.stats(FaultKind::storage).detected, 1u);
    int halted = 0;
    for (const auto& o : report.outcomes) {
        if (o.status == ReplicaStatus::halted) {
            ++halted;
            EXPECT_EQ(o.halt_kind, DetectionKind::storage_corruption);
        }
    }
    EXPECT_EQ(halted, 1);
}

TEST(HarnessTest, CoordinatorCrashPromotesNextReplica) {
    testing::ListCluster c(3);
    ASSERT_TRUE(c.apply_all(testing::adds(20)));
    c.crash(0);
    ASSERT_TRUE(c.apply_all(testing::adds(20), 100));
    EXPECT_TRUE(c.replicas[1]->node().is_coordinator(c.now));
    ASSERT_TRUE(c.run_until([&] { return c.replicas[1]->applied() == c.replicas[2]->applied(); }));
    // Applied instances form a contiguous prefix with every request once.
    EXPECT_EQ(c.replicas[1]->checksums(), c.replicas[2]->checksums());
    EXPECT_EQ(c.replicas[1]->applied_requests(), 40u);
    EXPECT_EQ(c.replicas[1]->get_state().size(), 40u);
}

TEST(HarnessTest, ConcurrentClientsAgreeOnOneOrder) {
    NetConfig net;
    net.seed = 4;
    net.delay_max = 6;
    testing::ListCluster c(3, Mode::hardened, net);
    RequestId next = 1;
    for (int round = 0; round < 30; ++round) {
        for (ReplicaId r = 0; r < 3; ++r) {
            c.replicas[r]->submit(next, ListApp::encode_op(ListApp::add("c" + std::to_string(next), r)), c.now);
            ++next;
        }
        c.step();
    }
    ASSERT_TRUE(c.run_until([&] {
        for (auto& r : c.replicas) {
            if (r->applied_requests() < 90) {
                // Retransmit whatever has not landed yet.
                if (c.now % 100 == 0) {
                    for (RequestId id = 1; id <= 90; ++id) {
                        if (!r->has_applied(id)) {
                            c.submit(id, ListApp::encode_op(ListApp::add("c" + std::to_string(id), 0)));
                        }
                    }
                }
                return false;
            }
        }
        return c.replicas[0]->applied() == c.replicas[1]->applied() &&
               c.replicas[1]->applied() == c.replicas[2]->applied();
    }, 20000));
    EXPECT_EQ(c.replicas[0]->checksums(), c.replicas[1]->checksums());
    EXPECT_EQ(c.replicas[0]->checksums(), c.replicas[2]->checksums());
    EXPECT_TRUE(c.events.empty());
}

TEST(ConfigTest, ParsesAllKeys) {
    const auto c = parse_config(R"(# comment
replicas = 5
ops = 20
mode = baseline
transport = sim
seed = 11
net_seed = 12
fault_seed = 13
drop_prob = 0.25
dup_prob = 0.5
delay_min = 2
delay_max = 7
partition = 10-20:0,1|2,3,4
msg_corrupt_prob = 0.05
state_corrupt_prob = 0
transition_drop_prob = 0.5
storage_corrupt_prob = 1
fault_targets = 1,3
heartbeat_interval = 3
suspect_timeout = 50
retry_timeout = 25
crash_restarts = 2
crash_downtime = 30
read_interval = 9
client_window = 4
client_retry = 99
tick_budget = 1234
stall_ticks = 321
log_dir = /tmp/x
fsync = true
replica.0.addr = 127.0.0.1:9000
replica.1.addr = 127.0.0.1:9001
)");
    EXPECT_EQ(c.replicas, 5u);
    EXPECT_EQ(c.ops, 20u);
    EXPECT_EQ(c.mode, Mode::baseline);
    EXPECT_EQ(c.seed, 11u);
    EXPECT_EQ(c.net_seed, 12u);
    EXPECT_EQ(c.fault_seed, 13u);
    EXPECT_DOUBLE_EQ(c.net.drop_prob, 0.25);
    EXPECT_EQ(c.net.delay_max, 7u);
    ASSERT_EQ(c.net.partitions.size(), 1u);
    EXPECT_EQ(c.net.partitions[0].start, 10u);
    EXPECT_EQ(c.net.partitions[0].groups[1], (std::set<ReplicaId>{2, 3, 4}));
    EXPECT_DOUBLE_EQ(c.faults.msg_corrupt_prob, 0.05);
    EXPECT_DOUBLE_EQ(c.faults.state_corrupt_prob, 0.0);
    EXPECT_EQ(c.faults.targets, (std::set<ReplicaId>{1, 3}));
    EXPECT_EQ(c.timing.suspect_timeout, 50u);
    EXPECT_EQ(c.crash_restarts, 2u);
    EXPECT_EQ(c.client_window, 4u);
    EXPECT_EQ(c.tick_budget, 1234u);
    EXPECT_EQ(c.log_dir, "/tmp/x");
    EXPECT_TRUE(c.fsync);
    EXPECT_EQ(c.addresses.size(), 2u);
}

TEST(ConfigTest, FileDefaultsInjectAtOnePercent) {
    const auto c = parse_config("");
    EXPECT_DOUBLE_EQ(c.faults.msg_corrupt_prob, 0.01);
    EXPECT_DOUBLE_EQ(c.faults.storage_corrupt_prob, 0.01);
}

TEST(ConfigTest, RejectsMalformedInput) {
    for (const char* bad : {"nonsense", "unknown_key = 1", "replicas = -1", "replicas = x", "drop_prob = 2",
                            "mode = paranoid", "transport = tcp", "partition = 5:0|1", "fsync = maybe",
                            "replica.1.addr = 127.0.0.1:1", "msg_corrupt_prob = 0.1x"}) {
        EXPECT_THROW(parse_config(bad), ConfigError) << bad;
    }
    ExperimentConfig zero;
    zero.replicas = 0;
    EXPECT_THROW(run_experiment(zero), ConfigError);
    ExperimentConfig udp;
    udp.transport = TransportKind::udp;
    EXPECT_THROW(run_experiment(udp), ConfigError);
}

TEST(ReportTest, ZeroInjectionRendersZeroRows) {
    const auto report = run_experiment(quiet(10));
    const auto machine = render_machine(report);
    for (auto kind : kFaultKinds) {
        const auto key = "fault." + std::string(to_string(kind)) + ".injected=0\n";
        EXPECT_NE(machine.find(key), std::string::npos) << key;
    }
    EXPECT_NE(render_table(report).find("message              0         0"), std::string::npos);
}

TEST(ReportTest, RenderIsDeterministicAndParsesBack) {
    auto config = quiet(300);
    config.faults.msg_corrupt_prob = 0.05;
    config.faults.state_corrupt_prob = 0.01;
    config.faults.transition_drop_prob = 0.01;
    const auto report = run_experiment(config);
    EXPECT_EQ(render_machine(report), render_machine(report));
    EXPECT_EQ(render_table(report), render_table(report));
    const auto parsed = parse_machine(render_machine(report));
    EXPECT_EQ(render_machine(parsed), render_machine(report));
    EXPECT_EQ(parsed.outcomes, report.outcomes);
    EXPECT_EQ(parsed.stats(FaultKind::message).injected, report.stats(FaultKind::message).injected);
}

TEST(ReportTest, ParseRejectsDamage) {
    const auto text = render_machine(run_experiment(quiet(5)));
    EXPECT_THROW(parse_machine(text + "extra=1\n"), ConfigError);
    EXPECT_THROW(parse_machine(text.substr(0, text.size() / 2)), ConfigError);
    auto dup = text + "ticks=3\n";
    EXPECT_THROW(parse_machine(dup), ConfigError);
}

TEST(ReportTest, IdenticalSeedsIdenticalReports) {
    auto config = quiet(300);
    config.net.drop_prob = 0.1;
    config.net.delay_max = 5;
    config.faults.msg_corrupt_prob = 0.05;
    config.crash_restarts = 2;
    EXPECT_EQ(render_machine(run_experiment(config)), render_machine(run_experiment(config)));
    config.seed = 2;
    const auto other = render_machine(run_experiment(config));
    config.seed = 1;
    EXPECT_NE(other, render_machine(run_experiment(config)));
}

TEST(HarnessTest, FileLogsWork) {
    auto config = quiet(100);
    config.log_dir = std::filesystem::temp_directory_path() / "hpaxos_harness_logs";
    config.crash_restarts = 2;
    const auto report = run_experiment(config);
    EXPECT_EQ(report.decided, 100u);
    EXPECT_FALSE(report.divergence);
    EXPECT_TRUE(std::filesystem::exists(config.log_dir / "0.log"));
    std::filesystem::remove_all(config.log_dir);
}

TEST(HarnessTest, UdpTransportRun) {
    auto config = quiet(60);
    config.transport = TransportKind::udp;
    config.addresses = {"127.0.0.1:47401", "127.0.0.1:47402", "127.0.0.1:47403"};
    config.faults.msg_corrupt_prob = 0.05;
    const auto report = run_experiment(config);
    EXPECT_EQ(report.decided, 60u);
    EXPECT_EQ(report.stats(FaultKind::message).detected, report.stats(FaultKind::message).injected);
    EXPECT_FALSE(report.divergence);
}

}  // namespace
}  // namespace hpaxos
