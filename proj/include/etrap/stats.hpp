// SPDX-License-Identifier: Apache-2.0
#pragma once

// Detection chain, Poisson electron-number inversion, TDC event streams
// (deadtime, histograms) and a Monte Carlo cycle simulator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "etrap/error.hpp"
#include "etrap/parallel.hpp"

namespace etrap {

struct DetectionChain {
    double extraction_efficiency = 1.0;
    double mesh_open_area = 0.5;
    double mcp_open_area = 0.6;
    double voltage_factor = 0.4;

    void validate() const
    {
        for (double f : {extraction_efficiency, mesh_open_area, mcp_open_area, voltage_factor}) {
            detail::require(std::isfinite(f) && f >= 0.0 && f <= 1.0, "detection chain factors must lie in [0, 1]");
        }
    }
};

inline double chain_efficiency(const DetectionChain& c)
{
    c.validate();
    return c.extraction_efficiency * c.mesh_open_area * c.mcp_open_area * c.voltage_factor;
}

struct PoissonEstimate {
    double p_detect = 0.0;
    double lambda = 0.0;          // mean detections per cycle
    double mean_electrons = 0.0;
    // Statistical one-sigma errors when the cycle count is known, else 0.
    double lambda_sigma = 0.0;
    double mean_electrons_sigma = 0.0;
};

class SaturatedDetector : public DomainError {
  public:
    using DomainError::DomainError;
};

/// lambda = -ln(1 - p), N = lambda / efficiency. With `cycles` > 0 the
/// binomial error on p is propagated.
inline PoissonEstimate estimate_mean_electrons(double p_detect, const DetectionChain& chain,
                                               std::uint64_t cycles = 0)
{
    detail::require(std::isfinite(p_detect) && p_detect >= 0.0 && p_detect <= 1.0,
                    "p_detect must lie in [0, 1)");
    if (p_detect == 1.0) {
        throw SaturatedDetector("p_detect = 1: detector saturated, the Poisson mean diverges");
    }
    const double eta = chain_efficiency(chain);
    detail::require(eta > 0.0, "chain efficiency must be positive to infer an electron number");
    PoissonEstimate e;
    e.p_detect = p_detect;
    e.lambda = -std::log1p(-p_detect);
    e.mean_electrons = e.lambda / eta;
    if (cycles > 0) {
        const double sp = std::sqrt(p_detect * (1.0 - p_detect) / static_cast<double>(cycles));
        e.lambda_sigma = sp / (1.0 - p_detect);
        e.mean_electrons_sigma = e.lambda_sigma / eta;
    }
    return e;
}

/// Detection probability after loading for t_load with time constant tau.
inline double loading_probability(double t_load, double tau, double p_max = 1.0)
{
    detail::require(tau > 0.0, "tau must be positive");
    return p_max * -std::expm1(-t_load / tau);
}

struct EventStream {
    std::vector<std::vector<double>> cycles;  // timestamps in ns per cycle
    double deadtime_ns = 60.0;

    std::size_t event_count() const
    {
        std::size_t n = 0;
        for (const auto& c : cycles) {
            n += c.size();
        }
        return n;
    }

    void validate() const
    {
        detail::require(std::isfinite(deadtime_ns) && deadtime_ns >= 0.0, "deadtime must be >= 0");
        for (const auto& c : cycles) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                detail::require(std::isfinite(c[i]), "timestamps must be finite");
                if (i > 0) {
                    detail::require(c[i] >= c[i - 1], "timestamps must be non-decreasing within a cycle");
                }
            }
        }
    }
};

/// Keep t' only if no kept t has t' - t < deadtime.
inline EventStream apply_deadtime(const EventStream& in)
{
    in.validate();
    EventStream out;
    out.deadtime_ns = in.deadtime_ns;
    out.cycles.reserve(in.cycles.size());
    for (const auto& c : in.cycles) {
        std::vector<double> kept;
        for (double t : c) {
            if (kept.empty() || t - kept.back() >= in.deadtime_ns) {
                kept.push_back(t);
            }
        }
        out.cycles.push_back(std::move(kept));
    }
    return out;
}

struct Histogram {
    double origin_ns = 0.0;
    double bin_width_ns = 1.0;
    std::vector<std::uint64_t> counts;
    std::vector<double> probability;  // events per cycle per bin
    std::uint64_t cycle_count = 0;

    double bin_start(std::size_t i) const { return origin_ns + static_cast<double>(i) * bin_width_ns; }
    double span_end() const { return bin_start(counts.size()); }
    std::vector<double> edges() const
    {
        std::vector<double> e(counts.size() + 1);
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] = bin_start(i);
        }
        return e;
    }
};

/// Uniform bins from floor(min / w) * w covering every timestamp.
inline Histogram build_histogram(const EventStream& stream, double bin_width_ns, std::uint64_t cycle_count)
{
    stream.validate();
    detail::require(std::isfinite(bin_width_ns) && bin_width_ns > 0.0, "bin width must be positive");
    detail::require(cycle_count > 0, "histogram needs a positive cycle count");
    detail::require(stream.cycles.size() <= cycle_count, "stream has more cycles than cycle_count");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : stream.cycles) {
        if (!c.empty()) {
            lo = std::min(lo, c.front());
            hi = std::max(hi, c.back());
        }
    }
    Histogram h;
    h.bin_width_ns = bin_width_ns;
    h.cycle_count = cycle_count;
    if (!std::isfinite(lo)) {
        h.counts.assign(1, 0);
        h.probability.assign(1, 0.0);
        return h;
    }
    h.origin_ns = std::floor(lo / bin_width_ns) * bin_width_ns;
    const auto bins = static_cast<std::size_t>(std::floor((hi - h.origin_ns) / bin_width_ns)) + 1;
    h.counts.assign(bins, 0);
    for (const auto& c : stream.cycles) {
        for (double t : c) {
            auto i = static_cast<std::size_t>(std::floor((t - h.origin_ns) / bin_width_ns));
            h.counts[std::min(i, bins - 1)] += 1;
        }
    }
    h.probability.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        h.probability[i] = static_cast<double>(h.counts[i]) / static_cast<double>(cycle_count);
    }
    return h;
}

/// Integrated probability over [t0, t1); partially covered bins count pro rata.
inline double window_sum(const Histogram& h, double t0, double t1)
{
    detail::require(std::isfinite(t0) && std::isfinite(t1) && t1 >= t0, "window needs t0 <= t1");
    const double tol = 1e-9 * h.bin_width_ns;
    detail::require(t0 >= h.origin_ns - tol && t1 <= h.span_end() + tol, "window lies outside the histogram span");
    double sum = 0.0;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double a = std::max(t0, h.bin_start(i));
        const double b = std::min(t1, h.bin_start(i + 1));
        if (b > a) {
            sum += h.probability[i] * (b - a) / h.bin_width_ns;
        }
    }
    return sum;
}

/// Fraction of cycles with at least one event in [t0, t1).
inline double detection_probability(const EventStream& stream, double t0, double t1, std::uint64_t cycle_count)
{
    detail::require(cycle_count > 0 && stream.cycles.size() <= cycle_count, "invalid cycle count");
    std::uint64_t hits = 0;
    for (const auto& c : stream.cycles) {
        hits += std::any_of(c.begin(), c.end(), [&](double t) { return t >= t0 && t < t1; }) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(cycle_count);
}

struct CycleProtocol {
    double t_load = 10e-6;  // s
    double t_wait = 0.0;    // s
    double readout_offset_ns = -1.0;  // < 0 places the window at t_load + t_wait
    double readout_width_ns = 50.0;
    double background_per_cycle = 1e-4;  // expected background counts per readout window
    double pulse_fwhm_ns = 2.0;

    double window_start() const
    {
        return readout_offset_ns >= 0.0 ? readout_offset_ns : (t_load + t_wait) * 1e9;
    }
    double window_center() const { return window_start() + 0.5 * readout_width_ns; }
    double window_end() const { return window_start() + readout_width_ns; }

    void validate() const
    {
        detail::require(std::isfinite(t_load) && t_load >= 0.0, "t_load must be >= 0");
        detail::require(std::isfinite(t_wait) && t_wait >= 0.0, "t_wait must be >= 0");
        detail::require(std::isfinite(readout_offset_ns), "readout offset must be finite");
        detail::require(std::isfinite(readout_width_ns) && readout_width_ns > 0.0, "readout width must be positive");
        detail::require(std::isfinite(background_per_cycle) && background_per_cycle >= 0.0,
                        "background must be >= 0");
        detail::require(std::isfinite(pulse_fwhm_ns) && pulse_fwhm_ns >= 0.0, "pulse FWHM must be >= 0");
    }
};

namespace detail {

/// splitmix64 as a standard uniform random bit generator.
class SplitMix64 {
  public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t state) : state_(state) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
};

inline std::uint64_t cycle_seed(std::uint64_t seed, std::uint64_t cycle)
{
    SplitMix64 a(seed);
    SplitMix64 b(a() ^ (cycle * 0xD1B54A32D192ED03ULL));
    return b();
}

}  // namespace detail

/// Per cycle: Poisson(true_mean) trapped electrons, thinned by the chain
/// efficiency, detected at Gaussian times around the readout centre, plus
/// uniform background over [0, window end) at the protocol's per-window rate.
/// Cycle c draws only from a generator keyed on (seed, c).
inline EventStream simulate_cycles(const CycleProtocol& protocol, double true_mean, const DetectionChain& chain,
                                   std::uint64_t cycles, std::uint64_t seed, unsigned workers = 1,
                                   double deadtime_ns = 60.0)
{
    protocol.validate();
    detail::require(cycles >= 1, "cycles must be >= 1");
    detail::require(std::isfinite(true_mean) && true_mean >= 0.0, "true mean must be >= 0");
    const double eta = chain_efficiency(chain);
    const double center = protocol.window_center();
    const double span = protocol.window_end();
    const double sigma = protocol.pulse_fwhm_ns / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double bg_mean = protocol.background_per_cycle * std::max(span, protocol.readout_width_ns)
                           / protocol.readout_width_ns;
    const double bg_lo = span > protocol.readout_width_ns ? 0.0 : protocol.window_start();

    auto one_cycle = [&](std::size_t c) {
        detail::SplitMix64 rng(detail::cycle_seed(seed, c));
        std::vector<double> ts;
        if (true_mean > 0.0 && eta > 0.0) {
            std::poisson_distribution<long> trapped(true_mean);
            const long n = trapped(rng);
            std::binomial_distribution<long> detected(n, eta);
            const long k = n > 0 ? detected(rng) : 0;
            std::normal_distribution<double> jitter(center, sigma);
            for (long i = 0; i < k; ++i) {
                ts.push_back(sigma > 0.0 ? jitter(rng) : center);
            }
        }
        if (bg_mean > 0.0) {
            std::poisson_distribution<long> background(bg_mean);
            std::uniform_real_distribution<double> when(bg_lo, span);
            const long b = background(rng);
            for (long i = 0; i < b; ++i) {
                ts.push_back(when(rng));
            }
        }
        std::sort(ts.begin(), ts.end());
        return ts;
    };

    EventStream s;
    s.deadtime_ns = deadtime_ns;
    s.cycles = parallel_map(static_cast<std::size_t>(cycles), workers, one_cycle);
    return s;
}

/// Rows cycle_index,timestamp_ns.
inline void write_events(std::ostream& os, const EventStream& s, const std::vector<std::string>& header = {})
{
    for (const auto& line : header) {
        os << "# " << line << '\n';
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "# cycles = %zu\n# deadtime_ns = %.17g\n", s.cycles.size(), s.deadtime_ns);
    os << buf;
    os << "cycle_index,timestamp_ns\n";
    for (std::size_t c = 0; c < s.cycles.size(); ++c) {
        for (double t : s.cycles[c]) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", c, t);
            os << buf;
        }
    }
}

/// Parse rows written by write_events; `cycles` must cover every index.
inline EventStream read_events(std::istream& is, std::size_t cycles, double deadtime_ns = 60.0)
{
    EventStream s;
    s.deadtime_ns = deadtime_ns;
    s.cycles.resize(cycles);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("cycle_index", 0) == 0) {
            continue;
        }
        std::size_t idx = 0;
        double t = 0.0;
        if (std::sscanf(line.c_str(), "%zu,%lf", &idx, &t) != 2) {
            throw InvalidArgument("malformed event row: " + line);
        }
        detail::require(idx < cycles, "event cycle index out of range");
        s.cycles[idx].push_back(t);
    }
    s.validate();
    return s;
}

/// Rows bin_start_ns,probability.
inline void write_histogram(std::ostream& os, const Histogram& h)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "# cycles = %llu\n", static_cast<unsigned long long>(h.cycle_count));
    os << buf;
    os << "bin_start_ns,probability\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", h.bin_start(i), h.probability[i]);
        os << buf;
    }
}

}  // namespace etrap
