#ifndef AA4MM_KERNEL_HPP
#define AA4MM_KERNEL_HPP

// Co-simulation kernel: coupling artifacts, interface artifacts, m-agents
// and the conservative coordination loop between a micro and a macro agent.
//
// Exchange protocol for a macro period [T, T+r):
//
//   A_m  --e@T-->  A_M  --i@T+1 .. i@T+r-->  A_m (ticks T+1 .. T+r)  --e@T+r--> ...
//
// The micro agent publishes its initial state at tick 0. Every read of a
// tick t waits until the producer's clock has reached t.

#include "aa4mm/coupling.hpp"
#include "aa4mm/flock_observation.hpp"
#include "aa4mm/macro.hpp"
#include "aa4mm/micro.hpp"

#include <algorithm>
#include <bit>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace aa4mm {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DeadlockError : std::runtime_error {
    DeadlockError(const std::string& what, std::string dump) : std::runtime_error(what), log_dump(std::move(dump)) {}
    std::string log_dump;
};

/// An interface-artifact failure, tagged with the agent and the tick at
/// which its cycle started.
struct AgentFailure : std::runtime_error {
    AgentFailure(std::string agent_name, SimTime at, const std::string& cause)
        : std::runtime_error(agent_name + " failed at tick " + std::to_string(at) + ": " + cause),
          agent(std::move(agent_name)), tick(at)
    {
    }
    std::string agent;
    SimTime tick;
};

// ---------------------------------------------------------------------------
// Payloads

/// One slice of a macro displacement list: the part-th of `parts` equal
/// sub-steps. parts == 0 marks an undivided list.
struct DisplacementShare {
    DisplacementList displacements;
    std::size_t part = 0;
    std::size_t parts = 0;

    friend bool operator==(const DisplacementShare&, const DisplacementShare&) = default;
};

using Payload = std::variant<MicroObservation, FlockObservationList, DisplacementShare, CommandSet>;

inline std::string_view payload_kind(const Payload& p)
{
    constexpr std::string_view names[] = {"MicroObservation", "FlockObservationList", "DisplacementList",
                                          "CommandSet"};
    return names[p.index()];
}

/// Element count: birds, flocks, flocks, or per-bird commands.
inline std::size_t payload_size(const Payload& p)
{
    return std::visit([](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, DisplacementShare>)
            return v.displacements.size();
        else
            return v.size();
    }, p);
}

namespace detail {

class Fnv1a {
public:
    void bytes(const void* data, std::size_t n)
    {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < n; ++k) {
            h_ ^= b[k];
            h_ *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void pos(Position p) { f64(p.x), f64(p.y); }
    void vec(Vec2 v) { f64(v.dx), f64(v.dy); }
    void ids(const std::vector<std::uint64_t>& v)
    {
        u64(v.size());
        for (auto id : v)
            u64(id);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

} // namespace detail

/// Content hash over the exact bit patterns of a payload.
inline std::uint64_t payload_digest(const Payload& p)
{
    detail::Fnv1a h;
    h.u64(p.index());
    std::visit([&h](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MicroObservation>) {
            h.u64(v.size());
            for (const auto& b : v)
                h.u64(b.id), h.pos(b.pos), h.f64(b.heading.degrees());
        } else if constexpr (std::is_same_v<T, FlockObservationList>) {
            h.u64(v.size());
            for (const auto& f : v)
                h.ids(f.members), h.pos(f.centroid), h.f64(f.heading.degrees()), h.f64(f.radius);
        } else if constexpr (std::is_same_v<T, DisplacementShare>) {
            h.u64(v.part), h.u64(v.parts), h.u64(v.displacements.size());
            for (const auto& d : v.displacements)
                h.u64(d.flock_id), h.ids(d.members), h.vec(d.v), h.f64(d.heading.degrees());
        } else {
            h.u64(v.size());
            for (const auto& [id, c] : v)
                h.u64(id), h.vec(c.v), h.f64(c.heading.degrees());
        }
    }, p);
    return h.value();
}

struct TimestampedEvent {
    SimTime timestamp = 0;
    Payload payload;
};

// ---------------------------------------------------------------------------
// Rendezvous: the lock shared by the artifacts of one multi-model, with
// deadlock detection for agents blocked in read().

class Rendezvous {
public:
    using Lock = std::unique_lock<std::mutex>;

    /// Register `n` agents that are about to run concurrently. Each must
    /// call leave() exactly once when it stops.
    void enroll(int n)
    {
        std::lock_guard g(mutex_);
        active_ += n;
    }

    void leave()
    {
        std::lock_guard g(mutex_);
        --active_;
        check_deadlock();
        cv_.notify_all();
    }

    /// RAII enroll(1) / leave().
    class Participation {
    public:
        explicit Participation(Rendezvous& rv) : rv_(&rv) { rv.enroll(1); }
        Participation(const Participation&) = delete;
        Participation& operator=(const Participation&) = delete;
        ~Participation() { rv_->leave(); }

    private:
        Rendezvous* rv_;
    };

    Lock lock() const { return Lock(mutex_); }

    void notify() { cv_.notify_all(); }

    /// Block until `ready()` holds. Throws DeadlockError when every running
    /// agent is waiting on a condition nobody can satisfy, and ProtocolError
    /// after abort().
    template <typename Pred>
    void wait(Lock& lock, Pred ready)
    {
        if (ready())
            return;
        auto self = waiters_.insert(waiters_.end(), std::function<bool()>(ready));
        check_deadlock();
        cv_.wait(lock, [&] { return aborted_ || deadlocked_ || ready(); });
        waiters_.erase(self);
        if (ready())
            return;
        if (deadlocked_)
            throw DeadlockError("deadlock: no agent can progress", {});
        throw ProtocolError("run aborted");
    }

    void abort()
    {
        std::lock_guard g(mutex_);
        aborted_ = true;
        cv_.notify_all();
    }

private:
    void check_deadlock()
    {
        if (waiters_.empty() || waiters_.size() < static_cast<std::size_t>(std::max(active_, 0)))
            return;
        for (const auto& w : waiters_)
            if (w())
                return;
        deadlocked_ = true;
        cv_.notify_all();
    }

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::list<std::function<bool()>> waiters_;
    int active_ = 0;
    bool aborted_ = false;
    bool deadlocked_ = false;
};

// ---------------------------------------------------------------------------
// Coupling artifact

enum class ArtifactKind { plain, interpretation };

using Transformer = std::function<Payload(const Payload&)>;

inline Payload identity_transform(const Payload& p) { return p; }

/// Buffered one-producer / one-consumer channel of timestamped events.
/// The transformer runs on read and must be a pure function.
class CouplingArtifact {
public:
    CouplingArtifact(std::string name, ArtifactKind kind, Transformer transform = identity_transform,
                     std::shared_ptr<Rendezvous> rv = std::make_shared<Rendezvous>())
        : name_(std::move(name)), kind_(kind), transform_(std::move(transform)), rv_(std::move(rv))
    {
    }

    const std::string& name() const { return name_; }
    ArtifactKind kind() const { return kind_; }
    Rendezvous& rendezvous() const { return *rv_; }

    void write(SimTime t, Payload payload)
    {
        auto lock = rv_->lock();
        if (clock_ && t <= *clock_)
            throw ProtocolError("artifact " + name_ + ": write at tick " + std::to_string(t) +
                                " not after producer clock " + std::to_string(*clock_));
        buffer_.push_back({t, std::move(payload)});
        clock_ = t;
        rv_->notify();
    }

    /// The producer declares it has passed tick t without writing.
    void advance(SimTime t)
    {
        auto lock = rv_->lock();
        if (clock_ && t < *clock_)
            throw ProtocolError("artifact " + name_ + ": producer clock cannot move backwards");
        clock_ = t;
        rv_->notify();
    }

    std::optional<SimTime> producer_clock() const
    {
        auto lock = rv_->lock();
        return clock_;
    }

    bool available(SimTime t) const
    {
        auto lock = rv_->lock();
        return reached(t);
    }

    /// Non-blocking read: nullopt while the producer has not reached t,
    /// otherwise the transformed event stamped t, or an empty optional when
    /// the producer passed t without writing.
    std::optional<std::optional<Payload>> try_read(SimTime t) const
    {
        std::optional<Payload> raw;
        {
            auto lock = rv_->lock();
            if (!reached(t))
                return std::nullopt;
            raw = find(t);
        }
        return deliver(raw);
    }

    /// Blocking read (rendezvous on the producer clock).
    std::optional<Payload> read(SimTime t) const
    {
        std::optional<Payload> raw;
        {
            auto lock = rv_->lock();
            rv_->wait(lock, [this, t] { return reached(t); });
            raw = find(t);
        }
        return deliver(raw);
    }

    /// The untransformed event stamped t, if any.
    std::optional<Payload> raw(SimTime t) const
    {
        auto lock = rv_->lock();
        return find(t);
    }

    Payload apply(const Payload& p) const { return transform_(p); }

    std::vector<SimTime> timestamps() const
    {
        auto lock = rv_->lock();
        std::vector<SimTime> out;
        for (const auto& e : buffer_)
            out.push_back(e.timestamp);
        return out;
    }

private:
    bool reached(SimTime t) const { return clock_ && *clock_ >= t; }

    std::optional<Payload> find(SimTime t) const
    {
        auto it = std::lower_bound(buffer_.begin(), buffer_.end(), t,
                                   [](const TimestampedEvent& e, SimTime v) { return e.timestamp < v; });
        if (it == buffer_.end() || it->timestamp != t)
            return std::nullopt;
        return it->payload;
    }

    std::optional<Payload> deliver(const std::optional<Payload>& raw) const
    {
        if (!raw)
            return std::nullopt;
        Payload out = transform_(*raw);
        if (kind_ == ArtifactKind::plain && payload_size(out) != payload_size(*raw))
            throw ProtocolError("plain artifact " + name_ + " changed payload cardinality");
        return out;
    }

    std::string name_;
    ArtifactKind kind_;
    Transformer transform_;
    std::shared_ptr<Rendezvous> rv_;
    std::vector<TimestampedEvent> buffer_;
    std::optional<SimTime> clock_;
};

// ---------------------------------------------------------------------------
// Interface artifact

/// Adapter between an m-agent and the model it drives.
class InterfaceArtifact {
public:
    virtual ~InterfaceArtifact() = default;

    virtual void init_model() = 0;
    /// Push the data read this cycle (nullopt: nothing arrived) into the model.
    virtual void update_model(const std::optional<Payload>& input) = 0;
    /// Advance the model by exactly one of its own steps.
    virtual void step_model() = 0;
    virtual Payload observe_model() const = 0;
};

// ---------------------------------------------------------------------------
// Event log

enum class Op { read, write };

struct LogRecord {
    SimTime tick = 0;
    std::string agent;
    Op op = Op::read;
    std::string artifact;
    std::string payload_kind;
    std::size_t payload_size = 0;
    std::uint64_t digest = 0;
    std::uint64_t cycle = 0;  // agent-local cycle number; initial publication is 0
    SimTime clock = 0;        // agent clock when the cycle started
    std::uint64_t period = 0; // macro period the record belongs to
    int rank = 0;             // position of the agent's phase within a period
};

class EventLog {
public:
    std::vector<LogRecord> records;

    /// `tick;agent;op;artifact;payload_kind;payload_size`, one per line.
    void write(std::ostream& os) const
    {
        for (const auto& r : records)
            os << r.tick << ';' << r.agent << ';' << (r.op == Op::read ? "read" : "write") << ';' << r.artifact << ';'
               << r.payload_kind << ';' << r.payload_size << '\n';
    }

    std::string str() const
    {
        std::ostringstream os;
        write(os);
        return os.str();
    }
};

// ---------------------------------------------------------------------------
// m-agent

/// Turns one cycle's observation into the events to write: (observation,
/// cycle start tick, step size) -> events.
using Publisher = std::function<std::vector<TimestampedEvent>(const Payload&, SimTime, SimTime)>;

/// Write the observation at the end of the cycle when that tick is a
/// multiple of `every`.
inline Publisher publish_every(SimTime every)
{
    return [every](const Payload& p, SimTime start, SimTime step) {
        std::vector<TimestampedEvent> out;
        if ((start + step) % every == 0)
            out.push_back({start + step, p});
        return out;
    };
}

struct InputPort {
    CouplingArtifact* artifact = nullptr;
    SimTime offset = 0; // a cycle starting at T reads tick T + offset
};

struct OutputPort {
    CouplingArtifact* artifact = nullptr;
    Publisher publish;
};

class MAgent {
public:
    MAgent(std::string name, std::unique_ptr<InterfaceArtifact> model, SimTime step_size, int rank)
        : name_(std::move(name)), model_(std::move(model)), step_(step_size), rank_(rank)
    {
        if (step_size == 0)
            throw std::invalid_argument("MAgent " + name_ + ": step size must be positive");
        if (!model_)
            throw std::invalid_argument("MAgent " + name_ + ": missing interface artifact");
    }

    const std::string& name() const { return name_; }
    SimTime step_size() const { return step_; }
    SimTime local_clock() const { return clock_; }
    InterfaceArtifact& model() { return *model_; }
    const InterfaceArtifact& model() const { return *model_; }
    const std::vector<InputPort>& inputs() const { return inputs_; }
    const std::vector<OutputPort>& outputs() const { return outputs_; }

    void add_input(CouplingArtifact& a, SimTime offset) { inputs_.push_back({&a, offset}); }
    void add_output(CouplingArtifact& a, Publisher p) { outputs_.push_back({&a, std::move(p)}); }
    /// A passive agent reads and updates its model but neither steps nor writes.
    void set_active(bool active) { active_ = active; }
    bool active() const { return active_; }

    void init() { model_->init_model(); }

    bool finished(SimTime horizon) const { return clock_ + step_ > horizon; }

    bool ready() const
    {
        return std::all_of(inputs_.begin(), inputs_.end(),
                           [&](const InputPort& in) { return in.artifact->available(clock_ + in.offset); });
    }

    /// Ticks this agent reads from `a` over a run ending at `horizon`.
    std::vector<SimTime> scheduled_reads(const CouplingArtifact& a, SimTime horizon) const
    {
        std::vector<SimTime> out;
        for (const auto& in : inputs_)
            if (in.artifact == &a)
                for (SimTime c = 0; c + step_ <= horizon; c += step_)
                    out.push_back(c + in.offset);
        return out;
    }

    /// Write the initial observation, stamped with the current clock.
    void publish_initial(std::vector<LogRecord>& log, SimTime ratio)
    {
        const Payload obs = model_->observe_model();
        for (auto& out : outputs_) {
            out.artifact->write(clock_, obs);
            log.push_back(record(clock_, Op::write, *out.artifact, obs, 0, ratio, 0));
        }
    }

    /// One read -> update -> step -> observe -> write cycle. With `blocking`
    /// reads wait on the producer; otherwise the caller guarantees ready().
    void cycle(std::vector<LogRecord>& log, SimTime ratio, bool blocking)
    {
        const SimTime start = clock_;
        ++cycles_;
        std::vector<std::optional<Payload>> received;
        for (const auto& in : inputs_) {
            const SimTime t = start + in.offset;
            std::optional<Payload> p;
            if (blocking) {
                p = in.artifact->read(t);
            } else {
                auto r = in.artifact->try_read(t);
                if (!r)
                    throw ProtocolError(name_ + ": input " + in.artifact->name() + "@" + std::to_string(t) +
                                        " not available");
                p = std::move(*r);
            }
            log.push_back(record(t, Op::read, *in.artifact, p, cycles_, ratio, rank_));
            received.push_back(std::move(p));
        }

        std::optional<Payload> obs;
        try {
            for (const auto& p : received)
                model_->update_model(p);
            if (active_) {
                model_->step_model();
                obs = model_->observe_model();
            }
        } catch (const ProtocolError&) {
            throw;
        } catch (const std::exception& e) {
            throw AgentFailure(name_, start, e.what());
        }

        if (obs) {
            for (auto& out : outputs_)
                for (auto& ev : out.publish(*obs, start, step_)) {
                    log.push_back(record(ev.timestamp, Op::write, *out.artifact, ev.payload, cycles_, ratio, rank_));
                    out.artifact->write(ev.timestamp, std::move(ev.payload));
                }
        }
        clock_ = start + step_;
    }

private:
    LogRecord record(SimTime t, Op op, const CouplingArtifact& a, const std::optional<Payload>& p,
                     std::uint64_t cycle, SimTime ratio, int rank) const
    {
        LogRecord r;
        r.tick = t;
        r.agent = name_;
        r.op = op;
        r.artifact = a.name();
        r.payload_kind = p ? std::string(payload_kind(*p)) : "absent";
        r.payload_size = p ? payload_size(*p) : 0;
        r.digest = p ? payload_digest(*p) : 0;
        r.cycle = cycle;
        r.clock = clock_;
        r.period = clock_ / ratio;
        r.rank = rank;
        return r;
    }

    std::string name_;
    std::unique_ptr<InterfaceArtifact> model_;
    SimTime step_;
    int rank_;
    SimTime clock_ = 0;
    std::uint64_t cycles_ = 0;
    bool active_ = true;
    std::vector<InputPort> inputs_;
    std::vector<OutputPort> outputs_;
};

// ---------------------------------------------------------------------------
// Multi-model and coordination loop

/// The two-level wiring: micro agent A_m, macro agent A_M, emergence
/// artifact e (A_m -> A_M) and, when immergence is on, artifact i
/// (A_M -> A_m).
struct MultiModel {
    std::shared_ptr<Rendezvous> rendezvous = std::make_shared<Rendezvous>();
    std::unique_ptr<CouplingArtifact> emergence;
    std::unique_ptr<CouplingArtifact> immergence;
    std::unique_ptr<MAgent> micro;
    std::unique_ptr<MAgent> macro;
    SimTime ratio = 1;
    SimTime horizon = 0;
    bool immergence_enabled = true;
    bool macro_behavior_enabled = true;

    void validate() const
    {
        if (!micro || !macro || !emergence)
            throw std::invalid_argument("MultiModel: micro agent, macro agent and artifact e are required");
        if (ratio == 0)
            throw std::invalid_argument("MultiModel: ratio must be positive");
        if (horizon % ratio != 0)
            throw std::invalid_argument("MultiModel: horizon must be a multiple of the ratio");
        if (immergence_enabled && !macro_behavior_enabled)
            throw std::invalid_argument("MultiModel: immergence requires macro behaviour");
        if (immergence_enabled != static_cast<bool>(immergence))
            throw std::invalid_argument("MultiModel: artifact i must exist exactly when immergence is enabled");
        if (micro->step_size() != 1 || macro->step_size() != ratio)
            throw std::invalid_argument("MultiModel: micro steps 1 tick, macro steps `ratio` ticks");
        for (const auto* a : {emergence.get(), immergence.get()})
            if (a && &a->rendezvous() != rendezvous.get())
                throw std::invalid_argument("MultiModel: artifact " + a->name() + " uses a foreign rendezvous");
    }
};

enum class Scheduling { sequential, threaded };

namespace detail {

// Records of each agent are kept in its own segment, then merged by
// (period, rank). Each (period, rank) slot belongs to a single agent, so
// the result does not depend on how the host interleaved the agents.
inline EventLog merge_segments(std::vector<std::vector<LogRecord>> segments)
{
    EventLog log;
    for (auto& s : segments)
        log.records.insert(log.records.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    std::stable_sort(log.records.begin(), log.records.end(), [](const LogRecord& a, const LogRecord& b) {
        return std::pair(a.period, a.rank) < std::pair(b.period, b.rank);
    });
    return log;
}

inline void run_sequential(MultiModel& mm, std::vector<LogRecord>& micro_log, std::vector<LogRecord>& macro_log)
{
    struct Slot {
        MAgent* agent;
        std::vector<LogRecord>* log;
    };
    const Slot slots[] = {{mm.macro.get(), &macro_log}, {mm.micro.get(), &micro_log}};
    for (;;) {
        bool pending = false, progressed = false;
        for (const auto& s : slots) {
            if (s.agent->finished(mm.horizon))
                continue;
            pending = true;
            if (s.agent->ready()) {
                s.agent->cycle(*s.log, mm.ratio, false);
                progressed = true;
            }
        }
        if (!pending)
            return;
        if (!progressed) {
            auto partial = merge_segments({micro_log, macro_log});
            throw DeadlockError("deadlock: no agent can progress at micro clock " +
                                    std::to_string(mm.micro->local_clock()) + ", macro clock " +
                                    std::to_string(mm.macro->local_clock()),
                                partial.str());
        }
    }
}

inline void run_threaded(MultiModel& mm, std::vector<LogRecord>& micro_log, std::vector<LogRecord>& macro_log)
{
    std::exception_ptr errors[2];
    auto body = [&mm](MAgent& agent, std::vector<LogRecord>& log, std::exception_ptr& err) {
        try {
            while (!agent.finished(mm.horizon))
                agent.cycle(log, mm.ratio, true);
        } catch (...) {
            err = std::current_exception();
            mm.rendezvous->abort();
        }
        mm.rendezvous->leave();
    };
    // Enroll both agents before either can block.
    mm.rendezvous->enroll(2);
    {
        std::jthread a(body, std::ref(*mm.micro), std::ref(micro_log), std::ref(errors[0]));
        std::jthread b(body, std::ref(*mm.macro), std::ref(macro_log), std::ref(errors[1]));
    }

    // Root cause first; the other agent's "run aborted" is skipped.
    std::exception_ptr first;
    for (auto& e : errors) {
        if (!e)
            continue;
        try {
            std::rethrow_exception(e);
        } catch (const DeadlockError&) {
            auto partial = merge_segments({micro_log, macro_log});
            throw DeadlockError("deadlock: no agent can progress", partial.str());
        } catch (const ProtocolError& p) {
            if (std::string_view(p.what()) == "run aborted")
                continue;
            first = first ? first : e;
        } catch (...) {
            first = first ? first : e;
        }
    }
    if (first)
        std::rethrow_exception(first);
}

} // namespace detail

/// Run the multi-model to its horizon and return the complete event log.
/// Both scheduling modes produce the same log.
inline EventLog run(MultiModel& mm, Scheduling mode = Scheduling::sequential)
{
    mm.validate();
    mm.micro->init();
    mm.macro->init();

    std::vector<LogRecord> micro_log, macro_log;
    mm.micro->publish_initial(micro_log, mm.ratio);
    if (mm.horizon > 0) {
        if (mode == Scheduling::sequential)
            detail::run_sequential(mm, micro_log, macro_log);
        else
            detail::run_threaded(mm, micro_log, macro_log);
    }
    return detail::merge_segments({std::move(micro_log), std::move(macro_log)});
}

// ---------------------------------------------------------------------------
// Log audit

struct AuditReport {
    std::size_t causality_violations = 0;
    std::size_t coherence_violations = 0;
    std::vector<std::string> messages;

    bool clean() const { return causality_violations == 0 && coherence_violations == 0; }
};

/// Check causality and coherence.
///
/// Causality, per agent cycle: the reads are performed at the agent clock
/// when the cycle starts, which must be earlier than every write of the
/// cycle; no read may deliver an event stamped after those writes; and all
/// reads of the cycle are logged before its writes.
///
/// Coherence: each scheduled read happens exactly once, in order, after the
/// matching write, and delivers transformer(written payload) bit for bit.
inline AuditReport audit(const EventLog& log, const MultiModel& mm)
{
    AuditReport rep;
    auto fail = [&rep](std::size_t& counter, std::string msg) {
        ++counter;
        if (rep.messages.size() < 32)
            rep.messages.push_back(std::move(msg));
    };

    struct CycleSpan {
        std::optional<SimTime> read_clock, max_read, min_write;
        bool wrote = false;
    };
    std::map<std::pair<std::string, std::uint64_t>, CycleSpan> spans;
    for (const auto& r : log.records) {
        if (r.cycle == 0)
            continue;
        const std::string where = r.agent + " cycle " + std::to_string(r.cycle);
        auto& span = spans[{r.agent, r.cycle}];
        if (r.op == Op::read) {
            if (span.wrote)
                fail(rep.causality_violations, where + ": read logged after a write");
            span.read_clock = std::max(span.read_clock.value_or(0), r.clock);
            span.max_read = std::max(span.max_read.value_or(0), r.tick);
        } else {
            span.wrote = true;
            span.min_write = std::min(span.min_write.value_or(r.tick), r.tick);
        }
    }
    for (const auto& [key, span] : spans) {
        if (!span.max_read || !span.min_write)
            continue;
        const std::string where = key.first + " cycle " + std::to_string(key.second);
        if (!(*span.read_clock < *span.min_write))
            fail(rep.causality_violations, where + ": read at clock " + std::to_string(*span.read_clock) +
                                               " not before write tick " + std::to_string(*span.min_write));
        if (*span.max_read > *span.min_write)
            fail(rep.causality_violations, where + ": read of tick " + std::to_string(*span.max_read) +
                                               " after write tick " + std::to_string(*span.min_write));
    }

    // Coherence, per artifact.
    struct Channel {
        const CouplingArtifact* artifact;
        const MAgent* consumer;
    };
    std::vector<Channel> channels{{mm.emergence.get(), mm.macro.get()}};
    if (mm.immergence)
        channels.push_back({mm.immergence.get(), mm.micro.get()});

    for (const auto& ch : channels) {
        const auto& name = ch.artifact->name();
        std::vector<SimTime> written;
        std::vector<SimTime> read;
        for (const auto& r : log.records) {
            if (r.artifact != name)
                continue;
            if (r.op == Op::write) {
                if (!written.empty() && r.tick <= written.back())
                    fail(rep.coherence_violations, name + ": write @" + std::to_string(r.tick) + " out of order");
                written.push_back(r.tick);
                auto raw = ch.artifact->raw(r.tick);
                if (!raw || payload_digest(*raw) != r.digest)
                    fail(rep.coherence_violations, name + ": write @" + std::to_string(r.tick) + " not buffered");
                continue;
            }
            read.push_back(r.tick);
            const bool seen = std::find(written.begin(), written.end(), r.tick) != written.end();
            auto raw = ch.artifact->raw(r.tick);
            if (r.payload_kind == "absent") {
                if (raw)
                    fail(rep.coherence_violations, name + ": read @" + std::to_string(r.tick) + " lost an event");
            } else if (!seen || !raw || payload_digest(ch.artifact->apply(*raw)) != r.digest) {
                fail(rep.coherence_violations, name + ": read @" + std::to_string(r.tick) +
                                                   " does not deliver the transformed write");
            }
        }
        if (read != ch.consumer->scheduled_reads(*ch.artifact, mm.horizon))
            fail(rep.coherence_violations, name + ": reads are lost, duplicated or reordered");
    }
    return rep;
}

} // namespace aa4mm

#endif // AA4MM_KERNEL_HPP
