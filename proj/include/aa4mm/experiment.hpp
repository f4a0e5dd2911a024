#ifndef AA4MM_EXPERIMENT_HPP
#define AA4MM_EXPERIMENT_HPP

// Replicated runs of one model variant, flock-count sampling and CSV output.

#include "aa4mm/flocking.hpp"
#include "aa4mm/kernel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <locale>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace aa4mm {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// m: no immergence, passive macro. M: baseline. M1: separation-dominant
/// macro. M2: cohesion/alignment-dominant macro. M3: baseline at 4 micro
/// ticks per macro step.
enum class Variant { m, M, M1, M2, M3 };

inline std::string to_string(Variant v)
{
    switch (v) {
    case Variant::m: return "m";
    case Variant::M: return "M";
    case Variant::M1: return "M1";
    case Variant::M2: return "M2";
    case Variant::M3: return "M3";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s)
{
    for (Variant v : {Variant::m, Variant::M, Variant::M1, Variant::M2, Variant::M3})
        if (to_string(v) == s)
            return v;
    throw ConfigError("unknown variant '" + s + "' (expected m, M, M1, M2 or M3)");
}

struct VariantSpec {
    Variant name = Variant::M;
    bool immergence_enabled = true;
    MacroParams macro_params;
    SimTime ratio = 1;

    bool macro_behavior_enabled() const { return immergence_enabled; }

    void validate() const
    {
        const SimTime expected = name == Variant::M3 ? 4 : 1;
        if (ratio != expected)
            throw ConfigError("variant " + to_string(name) + " requires ratio " + std::to_string(expected) +
                              ", got " + std::to_string(ratio));
        if (immergence_enabled == (name == Variant::m))
            throw ConfigError("variant " + to_string(name) + " has the wrong immergence setting");
        macro_params.validate("macro");
    }
};

inline VariantSpec variant_spec(Variant v)
{
    VariantSpec s;
    s.name = v;
    s.immergence_enabled = v != Variant::m;
    s.ratio = v == Variant::M3 ? 4 : 1;
    if (v == Variant::M1) {
        s.macro_params.max_separate_turn = 8.0;
        s.macro_params.max_align_turn = 1.0;
        s.macro_params.max_cohere_turn = 1.0;
    } else if (v == Variant::M2) {
        s.macro_params.max_align_turn = 8.0;
        s.macro_params.max_cohere_turn = 8.0;
        s.macro_params.max_separate_turn = 0.5;
    }
    return s;
}

struct ExperimentConfig {
    VariantSpec variant = variant_spec(Variant::M);
    std::size_t birds = 100;
    SimTime horizon = 500;
    std::size_t reps = 1;
    std::uint64_t base_seed = 0;
    /// 0 selects the variant's macro period.
    SimTime sample_interval = 0;
    TorusWorld world{100.0, 100.0};
    MicroParams micro;
    ClusterParams cluster;
    std::string out_path;
    std::string event_log_path;

    SimTime effective_sample_interval() const { return sample_interval == 0 ? variant.ratio : sample_interval; }

    void validate() const
    {
        variant.validate();
        micro.validate("micro");
        if (micro.vision < micro.min_separation)
            throw ConfigError("micro.vision must be at least micro.min_separation");
        try {
            cluster.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (reps < 1)
            throw ConfigError("reps must be at least 1");
        if (horizon % variant.ratio != 0)
            throw ConfigError("ticks must be a multiple of the ratio " + std::to_string(variant.ratio));
        const SimTime k = effective_sample_interval();
        if (k % variant.ratio != 0)
            throw ConfigError("sample interval must be a multiple of the ratio (flocks exist at macro boundaries)");
        if (horizon % k != 0)
            throw ConfigError("ticks must be a multiple of the sample interval");
    }
};

struct RunRecord {
    std::size_t rep = 0;
    SimTime tick = 0;
    std::size_t flock_count = 0;
    double mean_flock_radius = 0.0;
    double mean_flock_size = 0.0;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline CouplingSetup coupling_setup(const ExperimentConfig& cfg)
{
    CouplingSetup s;
    s.micro = cfg.micro;
    s.macro = cfg.variant.macro_params;
    s.cluster = cfg.cluster;
    s.ratio = cfg.variant.ratio;
    s.horizon = cfg.horizon;
    s.immergence_enabled = cfg.variant.immergence_enabled;
    s.macro_behavior_enabled = cfg.variant.macro_behavior_enabled();
    return s;
}

inline std::uint64_t rep_seed(const ExperimentConfig& cfg, std::size_t rep) { return cfg.base_seed + rep; }

inline MicroState initial_micro_state(const ExperimentConfig& cfg, std::size_t rep)
{
    Rng rng(rep_seed(cfg, rep));
    return init_random(cfg.birds, cfg.world, rng);
}

inline MultiModel build_multimodel(const ExperimentConfig& cfg, std::size_t rep)
{
    cfg.validate();
    return make_multimodel(initial_micro_state(cfg, rep), coupling_setup(cfg));
}

inline RunRecord summarize(std::size_t rep, SimTime tick, const FlockObservationList& flocks)
{
    RunRecord r{rep, tick, flocks.size(), 0.0, 0.0};
    for (const auto& f : flocks) {
        r.mean_flock_radius += f.radius;
        r.mean_flock_size += static_cast<double>(f.members.size());
    }
    if (!flocks.empty()) {
        r.mean_flock_radius /= static_cast<double>(flocks.size());
        r.mean_flock_size /= static_cast<double>(flocks.size());
    }
    return r;
}

/// Flock statistics at every sampled boundary of a finished run, read back
/// from artifact e through its transformer.
inline std::vector<RunRecord> sample_run(const MultiModel& mm, const ExperimentConfig& cfg, std::size_t rep)
{
    std::vector<RunRecord> out;
    const SimTime k = cfg.effective_sample_interval();
    for (SimTime t = 0; t <= cfg.horizon; t += k) {
        auto raw = mm.emergence->raw(t);
        if (!raw)
            throw ProtocolError("no micro state published at sampled tick " + std::to_string(t));
        out.push_back(summarize(rep, t, std::get<FlockObservationList>(mm.emergence->apply(*raw))));
    }
    return out;
}

struct RunResult {
    std::vector<RunRecord> records;
    EventLog log;
};

inline RunResult run_one(const ExperimentConfig& cfg, std::size_t rep, Scheduling mode = Scheduling::sequential)
{
    auto mm = build_multimodel(cfg, rep);
    RunResult res;
    res.log = run(mm, mode);
    res.records = sample_run(mm, cfg, rep);
    return res;
}

struct ReplicationFailure : std::runtime_error {
    ReplicationFailure(std::size_t rep_index, const std::string& cause)
        : std::runtime_error("replication " + std::to_string(rep_index) + " failed: " + cause), rep(rep_index)
    {
    }
    std::size_t rep;
};

/// All replications, ordered by (rep, tick) whatever the completion order.
inline std::vector<RunRecord> run_replicated(const ExperimentConfig& cfg, unsigned threads = 0)
{
    cfg.validate();
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.reps));

    std::vector<std::vector<RunRecord>> per_rep(cfg.reps);
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::optional<ReplicationFailure> failure;

    auto worker = [&] {
        for (std::size_t rep = next++; rep < cfg.reps; rep = next++) {
            try {
                per_rep[rep] = run_one(cfg, rep).records;
            } catch (const std::exception& e) {
                std::lock_guard g(err_mutex);
                if (!failure || rep < failure->rep)
                    failure.emplace(rep, e.what());
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned k = 1; k < threads; ++k)
            pool.emplace_back(worker);
        worker();
    }
    if (failure)
        throw *failure;

    std::vector<RunRecord> out;
    for (auto& r : per_rep)
        out.insert(out.end(), r.begin(), r.end());
    return out;
}

struct AggregateRow {
    SimTime tick = 0;
    double mean_count = 0.0;
    double std_count = 0.0; // population standard deviation
    std::size_t n = 0;
};

/// Per-tick mean and population standard deviation of the flock count.
inline std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records)
{
    struct Acc {
        std::size_t n = 0;
        double mean = 0.0, m2 = 0.0;
    };
    std::map<SimTime, Acc> acc;
    std::vector<const RunRecord*> ordered;
    for (const auto& r : records)
        ordered.push_back(&r);
    // Fixed accumulation order so permuted inputs give identical bits.
    std::sort(ordered.begin(), ordered.end(), [](const RunRecord* a, const RunRecord* b) {
        return std::tie(a->tick, a->rep, a->flock_count) < std::tie(b->tick, b->rep, b->flock_count);
    });
    for (const auto* r : ordered) {
        auto& a = acc[r->tick];
        ++a.n;
        const double x = static_cast<double>(r->flock_count);
        const double d = x - a.mean;
        a.mean += d / static_cast<double>(a.n);
        a.m2 += d * (x - a.mean);
    }
    std::vector<AggregateRow> out;
    for (const auto& [tick, a] : acc)
        out.push_back({tick, a.mean, std::sqrt(std::max(0.0, a.m2 / static_cast<double>(a.n))), a.n});
    return out;
}

namespace detail {

inline std::ostream& csv_stream(std::ostream& os)
{
    os.imbue(std::locale::classic());
    os << std::fixed << std::setprecision(6);
    return os;
}

} // namespace detail

inline void write_records_csv(std::ostream& os, Variant v, const std::vector<RunRecord>& records)
{
    detail::csv_stream(os) << "variant,rep,tick,flock_count,mean_flock_size,mean_flock_radius\n";
    for (const auto& r : records)
        os << to_string(v) << ',' << r.rep << ',' << r.tick << ',' << r.flock_count << ',' << r.mean_flock_size
           << ',' << r.mean_flock_radius << '\n';
}

inline void write_aggregate_csv(std::ostream& os, Variant v, const std::vector<AggregateRow>& rows)
{
    detail::csv_stream(os) << "variant,tick,mean_count,std_count\n";
    for (const auto& r : rows)
        os << to_string(v) << ',' << r.tick << ',' << r.mean_count << ',' << r.std_count << '\n';
}

/// `runs.csv` -> `runs_aggregate.csv`.
inline std::string aggregate_path_for(const std::string& out_path)
{
    const auto slash = out_path.find_last_of('/');
    const auto dot = out_path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return out_path + "_aggregate.csv";
    return out_path.substr(0, dot) + "_aggregate" + out_path.substr(dot);
}

} // namespace aa4mm

#endif // AA4MM_EXPERIMENT_HPP
