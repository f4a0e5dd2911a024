#include "aa4mm/flocking.hpp"
#include "aa4mm/kernel.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <sstream>
#include <thread>

using namespace aa4mm;

namespace {

const TorusWorld world100{100.0, 100.0};

MicroState ten_bird_state()
{
    MicroState s;
    s.world = world100;
    for (BirdId k = 0; k < 10; ++k)
        s.birds.push_back({k, {20 + 0.5 * static_cast<double>(k), 30}, HeadingDeg(45 + static_cast<double>(k))});
    return s;
}

MicroState random_state(std::uint64_t seed, std::size_t n)
{
    Rng rng(seed);
    return init_random(n, world100, rng);
}

CouplingSetup setup(SimTime ratio, SimTime horizon, bool immergence = true)
{
    CouplingSetup s;
    s.ratio = ratio;
    s.horizon = horizon;
    s.immergence_enabled = immergence;
    s.macro_behavior_enabled = immergence;
    return s;
}

// Same wiring as make_multimodel except that A_M waits for e one tick too
// late, so each agent waits on the other.
MultiModel miswired(SimTime horizon)
{
    MultiModel mm;
    mm.horizon = horizon;
    mm.emergence = std::make_unique<CouplingArtifact>("e", ArtifactKind::interpretation,
                                                      emergence_transformer(ClusterParams{}, world100), mm.rendezvous);
    mm.immergence =
        std::make_unique<CouplingArtifact>("i", ArtifactKind::interpretation, immergence_transformer(), mm.rendezvous);
    mm.micro = std::make_unique<MAgent>("A_m", std::make_unique<MicroInterface>(ten_bird_state(), MicroParams{}), 1, 2);
    mm.macro = std::make_unique<MAgent>("A_M", std::make_unique<MacroInterface>(world100, MacroParams{}), 1, 1);
    mm.micro->add_output(*mm.emergence, publish_every(1));
    mm.macro->add_input(*mm.emergence, 1);
    mm.macro->add_output(*mm.immergence, publish_spread());
    mm.micro->add_input(*mm.immergence, 1);
    return mm;
}

// Macro model whose step fails from its third step on.
class FailingMacro final : public InterfaceArtifact {
public:
    void init_model() override { steps_ = 0; }
    void update_model(const std::optional<Payload>&) override {}
    void step_model() override
    {
        if (++steps_ >= 3)
            throw std::runtime_error("macro model diverged");
    }
    Payload observe_model() const override { return DisplacementShare{}; }

private:
    int steps_ = 0;
};

MultiModel with_failing_macro(SimTime horizon)
{
    MultiModel mm = make_multimodel(ten_bird_state(), setup(1, horizon));
    auto macro = std::make_unique<MAgent>("A_M", std::make_unique<FailingMacro>(), 1, 1);
    macro->add_input(*mm.emergence, 0);
    macro->add_output(*mm.immergence, publish_spread());
    mm.macro = std::move(macro);
    return mm;
}

struct ParsedLine {
    SimTime tick;
    std::string agent, op, artifact, kind;
    std::size_t size;
};

// Independent reader for the exported log format.
std::vector<ParsedLine> parse_log(const std::string& text)
{
    std::vector<ParsedLine> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t pos; (pos = line.find(';', start)) != std::string::npos; start = pos + 1)
            f.push_back(line.substr(start, pos - start));
        f.push_back(line.substr(start));
        EXPECT_EQ(f.size(), 6u) << line;
        if (f.size() != 6)
            continue;
        out.push_back({std::stoull(f[0]), f[1], f[2], f[3], f[4], std::stoull(f[5])});
    }
    return out;
}

} // namespace

TEST(CouplingArtifact, WritesMustAdvance)
{
    CouplingArtifact a("x", ArtifactKind::plain);
    a.write(0, MicroObservation{});
    EXPECT_THROW(a.write(0, MicroObservation{}), ProtocolError);
    a.write(3, MicroObservation{});
    EXPECT_THROW(a.write(2, MicroObservation{}), ProtocolError);
    EXPECT_EQ(a.timestamps(), (std::vector<SimTime>{0, 3}));
    EXPECT_THROW(a.advance(1), ProtocolError);
}

TEST(CouplingArtifact, ReadSemantics)
{
    CouplingArtifact a("x", ArtifactKind::plain);
    EXPECT_FALSE(a.try_read(0).has_value());
    const MicroObservation one{{0, {1, 1}, HeadingDeg(0)}};
    a.write(2, one);

    auto absent = a.try_read(1);
    ASSERT_TRUE(absent.has_value());
    EXPECT_FALSE(absent->has_value());

    auto hit = a.try_read(2);
    ASSERT_TRUE(hit.has_value() && hit->has_value());
    EXPECT_EQ(std::get<MicroObservation>(**hit), one);
    // reads do not consume
    EXPECT_EQ(a.read(2), *hit);
    EXPECT_EQ(a.read(2), *hit);

    EXPECT_FALSE(a.try_read(3).has_value());
    a.advance(5);
    EXPECT_TRUE(a.available(5));
    EXPECT_FALSE(a.read(4).has_value());
}

TEST(CouplingArtifact, TransformerRunsOnRead)
{
    int calls = 0;
    CouplingArtifact a("x", ArtifactKind::interpretation, [&calls](const Payload& p) -> Payload {
        ++calls;
        return FlockObservationList(payload_size(p) + 1);
    });
    a.write(0, MicroObservation{});
    EXPECT_EQ(calls, 0);
    EXPECT_EQ(payload_size(*a.read(0)), 1u);
    EXPECT_EQ(calls, 1);
    EXPECT_EQ(payload_kind(*a.raw(0)), "MicroObservation");
}

TEST(CouplingArtifact, PlainArtifactKeepsCardinality)
{
    CouplingArtifact a("x", ArtifactKind::plain, [](const Payload&) -> Payload { return MicroObservation{}; });
    a.write(0, MicroObservation{{0, {1, 1}, HeadingDeg(0)}});
    EXPECT_THROW(a.read(0), ProtocolError);
}

TEST(CouplingArtifact, BlockingReadWaitsForProducer)
{
    auto rv = std::make_shared<Rendezvous>();
    CouplingArtifact a("x", ArtifactKind::plain, identity_transform, rv);
    rv->enroll(2);
    std::optional<Payload> got;
    std::thread reader([&] {
        got = a.read(3);
        rv->leave();
    });
    for (SimTime t = 1; t <= 3; ++t) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        a.write(t, MicroObservation(static_cast<std::size_t>(t)));
    }
    reader.join();
    rv->leave();
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(payload_size(*got), 3u);
}

TEST(CouplingArtifact, LoneBlockedReaderIsADeadlock)
{
    CouplingArtifact a("x", ArtifactKind::plain);
    EXPECT_THROW(a.read(0), DeadlockError);
}

TEST(Payload, KindsAndDigests)
{
    EXPECT_EQ(payload_kind(MicroObservation{}), "MicroObservation");
    EXPECT_EQ(payload_kind(FlockObservationList{}), "FlockObservationList");
    EXPECT_EQ(payload_kind(DisplacementShare{}), "DisplacementList");
    EXPECT_EQ(payload_kind(CommandSet{}), "CommandSet");

    const MicroObservation a{{0, {1, 1}, HeadingDeg(0)}};
    MicroObservation b = a;
    EXPECT_EQ(payload_digest(a), payload_digest(b));
    b[0].pos.x = std::nextafter(1.0, 2.0);
    EXPECT_NE(payload_digest(a), payload_digest(b));
    EXPECT_NE(payload_digest(MicroObservation{}), payload_digest(CommandSet{}));
}

TEST(Run, HorizonZeroOnlyPublishesInitialState)
{
    auto mm = make_multimodel(ten_bird_state(), setup(1, 0));
    const auto log = run(mm);
    EXPECT_EQ(log.str(), "0;A_m;write;e;MicroObservation;10\n");
    EXPECT_TRUE(audit(log, mm).clean());
}

TEST(Run, TraceForUnitRatio)
{
    auto mm = make_multimodel(ten_bird_state(), setup(1, 2));
    const auto log = run(mm);
    EXPECT_EQ(log.str(), "0;A_m;write;e;MicroObservation;10\n"
                         "0;A_M;read;e;FlockObservationList;1\n"
                         "1;A_M;write;i;DisplacementList;1\n"
                         "1;A_m;read;i;CommandSet;10\n"
                         "1;A_m;write;e;MicroObservation;10\n"
                         "1;A_M;read;e;FlockObservationList;1\n"
                         "2;A_M;write;i;DisplacementList;1\n"
                         "2;A_m;read;i;CommandSet;10\n"
                         "2;A_m;write;e;MicroObservation;10\n");
    EXPECT_TRUE(audit(log, mm).clean());
}

TEST(Run, TraceForRatioFour)
{
    auto mm = make_multimodel(ten_bird_state(), setup(4, 4));
    const auto log = run(mm);
    EXPECT_EQ(log.str(), "0;A_m;write;e;MicroObservation;10\n"
                         "0;A_M;read;e;FlockObservationList;1\n"
                         "1;A_M;write;i;DisplacementList;1\n"
                         "2;A_M;write;i;DisplacementList;1\n"
                         "3;A_M;write;i;DisplacementList;1\n"
                         "4;A_M;write;i;DisplacementList;1\n"
                         "1;A_m;read;i;CommandSet;10\n"
                         "2;A_m;read;i;CommandSet;10\n"
                         "3;A_m;read;i;CommandSet;10\n"
                         "4;A_m;read;i;CommandSet;10\n"
                         "4;A_m;write;e;MicroObservation;10\n");
    EXPECT_TRUE(audit(log, mm).clean());
}

TEST(Run, EmptyDisplacementListIsStillWritten)
{
    MicroState lone;
    lone.world = world100;
    lone.birds = {{0, {10, 10}, HeadingDeg(0)}};
    auto mm = make_multimodel(lone, setup(1, 1));
    const auto log = run(mm);
    EXPECT_EQ(log.str(), "0;A_m;write;e;MicroObservation;1\n"
                         "0;A_M;read;e;FlockObservationList;0\n"
                         "1;A_M;write;i;DisplacementList;0\n"
                         "1;A_m;read;i;CommandSet;0\n"
                         "1;A_m;write;e;MicroObservation;1\n");
}

TEST(Run, PassiveMacroWritesNothing)
{
    auto mm = make_multimodel(ten_bird_state(), setup(1, 2, false));
    const auto log = run(mm);
    EXPECT_EQ(log.str(), "0;A_m;write;e;MicroObservation;10\n"
                         "0;A_M;read;e;FlockObservationList;1\n"
                         "1;A_m;write;e;MicroObservation;10\n"
                         "1;A_M;read;e;FlockObservationList;1\n"
                         "2;A_m;write;e;MicroObservation;10\n");
    EXPECT_TRUE(audit(log, mm).clean());
    // the registry still follows the observations
    EXPECT_EQ(macro_model(mm).state().flocks.size(), 1u);
}

TEST(Run, SchedulersProduceIdenticalLogsAndStates)
{
    for (SimTime ratio : {1u, 4u}) {
        auto a = make_multimodel(random_state(5, 120), setup(ratio, 40));
        auto b = make_multimodel(random_state(5, 120), setup(ratio, 40));
        const auto la = run(a, Scheduling::sequential);
        const auto lb = run(b, Scheduling::threaded);
        EXPECT_EQ(la.str(), lb.str());
        ASSERT_EQ(la.records.size(), lb.records.size());
        for (std::size_t k = 0; k < la.records.size(); ++k)
            EXPECT_EQ(la.records[k].digest, lb.records[k].digest);
        EXPECT_EQ(micro_model(a).state(), micro_model(b).state());
        EXPECT_TRUE(audit(la, a).clean());
        EXPECT_TRUE(audit(lb, b).clean());
    }
}

TEST(Run, ExportedLogParsesBack)
{
    auto mm = make_multimodel(random_state(6, 80), setup(4, 16));
    const auto log = run(mm);
    const auto lines = parse_log(log.str());
    ASSERT_EQ(lines.size(), log.records.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const auto& r = log.records[k];
        EXPECT_EQ(lines[k].tick, r.tick);
        EXPECT_EQ(lines[k].agent, r.agent);
        EXPECT_EQ(lines[k].op, r.op == Op::read ? "read" : "write");
        EXPECT_EQ(lines[k].artifact, r.artifact);
        EXPECT_EQ(lines[k].kind, r.payload_kind);
        EXPECT_EQ(lines[k].size, r.payload_size);
    }
}

TEST(Run, DeadlockIsReportedSequential)
{
    auto mm = miswired(3);
    try {
        run(mm, Scheduling::sequential);
        FAIL() << "expected a deadlock";
    } catch (const DeadlockError& e) {
        EXPECT_NE(e.log_dump.find("0;A_m;write;e"), std::string::npos);
    }
}

TEST(Run, DeadlockIsReportedThreaded)
{
    auto mm = miswired(3);
    try {
        run(mm, Scheduling::threaded);
        FAIL() << "expected a deadlock";
    } catch (const DeadlockError& e) {
        EXPECT_NE(e.log_dump.find("0;A_m;write;e"), std::string::npos);
    }
}

TEST(Run, AgentFailureCarriesTick)
{
    for (auto mode : {Scheduling::sequential, Scheduling::threaded}) {
        auto mm = with_failing_macro(6);
        try {
            run(mm, mode);
            FAIL() << "expected a failure";
        } catch (const AgentFailure& e) {
            EXPECT_EQ(e.agent, "A_M");
            EXPECT_EQ(e.tick, 2u);
        }
    }
}

TEST(Run, InvalidWiringIsRejected)
{
    auto mm = make_multimodel(ten_bird_state(), setup(4, 4));
    mm.horizon = 6;
    EXPECT_THROW(run(mm), std::invalid_argument);

    auto foreign = make_multimodel(ten_bird_state(), setup(1, 2));
    foreign.rendezvous = std::make_shared<Rendezvous>();
    EXPECT_THROW(run(foreign), std::invalid_argument);
}

TEST(Audit, DetectsTampering)
{
    auto mm = make_multimodel(random_state(7, 60), setup(1, 5));
    const auto log = run(mm);
    ASSERT_TRUE(audit(log, mm).clean());

    auto late_read = log;
    for (auto& r : late_read.records)
        if (r.agent == "A_M" && r.op == Op::read && r.tick == 2) {
            r.tick = 4;
            break;
        }
    const auto a = audit(late_read, mm);
    EXPECT_GT(a.causality_violations, 0u);
    EXPECT_GT(a.coherence_violations, 0u);

    auto corrupted = log;
    for (auto& r : corrupted.records)
        if (r.artifact == "i" && r.op == Op::read) {
            r.digest ^= 1;
            break;
        }
    EXPECT_GT(audit(corrupted, mm).coherence_violations, 0u);

    auto dropped = log;
    for (auto it = dropped.records.begin(); it != dropped.records.end(); ++it)
        if (it->artifact == "e" && it->op == Op::read && it->tick == 3) {
            dropped.records.erase(it);
            break;
        }
    EXPECT_GT(audit(dropped, mm).coherence_violations, 0u);
}

TEST(Cardinality, HoldsOnRuns)
{
    for (SimTime ratio : {1u, 4u}) {
        auto mm = make_multimodel(random_state(8, 150), setup(ratio, 24));
        const auto log = run(mm);
        const auto rep = check_cardinality(log, mm, ClusterParams{}.min_size);
        EXPECT_GT(rep.checked, 0u);
        EXPECT_EQ(rep.violations, 0u);
    }
}
