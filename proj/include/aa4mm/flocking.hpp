#ifndef AA4MM_FLOCKING_HPP
#define AA4MM_FLOCKING_HPP

// Wiring of the boids / flocks case onto the kernel: interface artifacts
// for both models, the e and i transformers and the publishers that give
// each agent its write pattern.

#include "aa4mm/coupling.hpp"
#include "aa4mm/kernel.hpp"
#include "aa4mm/macro.hpp"
#include "aa4mm/micro.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace aa4mm {

class MicroInterface final : public InterfaceArtifact {
public:
    using StepHook = std::function<void(const MicroState&)>;

    MicroInterface(MicroState initial, MicroParams params) : initial_(std::move(initial)), params_(params)
    {
        params_.validate("micro");
        if (params_.vision < params_.min_separation)
            throw std::invalid_argument("micro: vision must be at least min_separation");
    }

    void init_model() override
    {
        state_ = initial_;
        pending_.reset();
    }

    void update_model(const std::optional<Payload>& input) override
    {
        pending_.reset();
        if (!input)
            return;
        const auto* cmds = std::get_if<CommandSet>(&*input);
        if (!cmds)
            throw ProtocolError("micro model expects a CommandSet, got " + std::string(payload_kind(*input)));
        pending_ = *cmds;
    }

    void step_model() override
    {
        state_ = pending_ ? micro_step(state_, *pending_, params_) : micro_step(state_, params_);
        pending_.reset();
        if (hook_)
            hook_(state_);
    }

    Payload observe_model() const override { return observe(state_); }

    const MicroState& state() const { return state_; }
    /// Called with the new state after every step.
    void on_step(StepHook hook) { hook_ = std::move(hook); }

private:
    MicroState initial_;
    MicroParams params_;
    MicroState state_;
    std::optional<CommandSet> pending_;
    StepHook hook_;
};

class MacroInterface final : public InterfaceArtifact {
public:
    MacroInterface(TorusWorld world, MacroParams params) : world_(world), params_(params)
    {
        params_.validate("macro");
    }

    void init_model() override
    {
        state_ = MacroState{};
        state_.world = world_;
        before_ = state_;
    }

    /// Registry synchronization; absent input means no flock was observed.
    void update_model(const std::optional<Payload>& input) override
    {
        FlockObservationList obs;
        if (input) {
            const auto* list = std::get_if<FlockObservationList>(&*input);
            if (!list)
                throw ProtocolError("macro model expects a FlockObservationList, got " +
                                    std::string(payload_kind(*input)));
            obs = *list;
        }
        state_ = sync_registry(state_, obs);
        before_ = state_;
    }

    void step_model() override
    {
        before_ = state_;
        state_ = macro_step(state_, params_);
    }

    Payload observe_model() const override { return DisplacementShare{displacements(before_, state_), 0, 0}; }

    const MacroState& state() const { return state_; }

private:
    TorusWorld world_;
    MacroParams params_;
    MacroState state_;
    MacroState before_;
};

/// Write the undivided displacement list once per micro tick of the
/// cycle, the k-th copy tagged as part k of `step`.
inline Publisher publish_spread()
{
    return [](const Payload& p, SimTime start, SimTime step) {
        const auto* whole = std::get_if<DisplacementShare>(&p);
        if (!whole)
            throw ProtocolError("spread publisher expects a DisplacementList");
        std::vector<TimestampedEvent> out;
        for (SimTime k = 1; k <= step; ++k)
            out.push_back({start + k, DisplacementShare{whole->displacements, k, step}});
        return out;
    };
}

inline Transformer emergence_transformer(ClusterParams params, TorusWorld world)
{
    params.validate();
    return [params, world](const Payload& p) -> Payload {
        const auto* obs = std::get_if<MicroObservation>(&p);
        if (!obs)
            throw ProtocolError("emergence transformer expects a MicroObservation");
        return emergence_transform(*obs, params, world);
    };
}

inline Transformer immergence_transformer()
{
    return [](const Payload& p) -> Payload {
        const auto* share = std::get_if<DisplacementShare>(&p);
        if (!share)
            throw ProtocolError("immergence transformer expects a DisplacementList");
        const std::size_t parts = share->parts == 0 ? 1 : share->parts;
        const std::size_t part = share->parts == 0 ? 1 : share->part;
        if (part < 1 || part > parts)
            throw ProtocolError("immergence transformer: share index out of range");
        return immergence_transform(share->displacements, parts)[part - 1];
    };
}

struct CouplingSetup {
    MicroParams micro;
    MacroParams macro;
    ClusterParams cluster;
    SimTime ratio = 1;
    SimTime horizon = 0;
    bool immergence_enabled = true;
    bool macro_behavior_enabled = true;
};

inline MultiModel make_multimodel(MicroState initial, const CouplingSetup& setup)
{
    MultiModel mm;
    mm.ratio = setup.ratio;
    mm.horizon = setup.horizon;
    mm.immergence_enabled = setup.immergence_enabled;
    mm.macro_behavior_enabled = setup.macro_behavior_enabled;

    const TorusWorld world = initial.world;
    mm.emergence = std::make_unique<CouplingArtifact>("e", ArtifactKind::interpretation,
                                                      emergence_transformer(setup.cluster, world), mm.rendezvous);
    mm.micro = std::make_unique<MAgent>("A_m", std::make_unique<MicroInterface>(std::move(initial), setup.micro),
                                        1, 2);
    mm.macro = std::make_unique<MAgent>("A_M", std::make_unique<MacroInterface>(world, setup.macro),
                                        setup.ratio, 1);

    mm.micro->add_output(*mm.emergence, publish_every(setup.ratio));
    mm.macro->add_input(*mm.emergence, 0);
    mm.macro->set_active(setup.macro_behavior_enabled);

    if (setup.immergence_enabled) {
        mm.immergence = std::make_unique<CouplingArtifact>("i", ArtifactKind::interpretation,
                                                           immergence_transformer(), mm.rendezvous);
        mm.macro->add_output(*mm.immergence, publish_spread());
        mm.micro->add_input(*mm.immergence, 1);
    }
    mm.validate();
    return mm;
}

inline MicroInterface& micro_model(MultiModel& mm) { return dynamic_cast<MicroInterface&>(mm.micro->model()); }
inline MacroInterface& macro_model(MultiModel& mm) { return dynamic_cast<MacroInterface&>(mm.macro->model()); }

struct CardinalityReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    std::vector<std::string> messages;
};

/// e never yields more than floor(birds / min_size) flocks; i yields one
/// command per flock member.
inline CardinalityReport check_cardinality(const EventLog& log, const MultiModel& mm, std::size_t min_size)
{
    CardinalityReport rep;
    auto fail = [&rep](std::string msg) {
        ++rep.violations;
        if (rep.messages.size() < 32)
            rep.messages.push_back(std::move(msg));
    };
    for (const auto& r : log.records) {
        if (r.artifact == "e") {
            auto raw = mm.emergence->raw(r.tick);
            if (!raw)
                continue;
            ++rep.checked;
            const std::size_t birds = payload_size(*raw);
            const std::size_t flocks = r.op == Op::read ? r.payload_size : payload_size(mm.emergence->apply(*raw));
            if (flocks > birds / min_size)
                fail("e@" + std::to_string(r.tick) + ": " + std::to_string(flocks) + " flocks from " +
                     std::to_string(birds) + " birds");
        } else if (r.artifact == "i" && mm.immergence) {
            auto raw = mm.immergence->raw(r.tick);
            if (!raw)
                continue;
            ++rep.checked;
            std::size_t members = 0;
            for (const auto& d : std::get<DisplacementShare>(*raw).displacements)
                members += d.members.size();
            const std::size_t commands =
                r.op == Op::read ? r.payload_size : payload_size(mm.immergence->apply(*raw));
            if (commands != members)
                fail("i@" + std::to_string(r.tick) + ": " + std::to_string(commands) + " commands for " +
                     std::to_string(members) + " members");
        }
    }
    return rep;
}

} // namespace aa4mm

#endif // AA4MM_FLOCKING_HPP
