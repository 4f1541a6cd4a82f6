#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "retina/error.hpp"

namespace retina::dynamics {

// First-order time constant that reaches `settle_fraction` after `settle_time_ms`.
inline double derive_tau(double settle_fraction, double settle_time_ms) {
    if (!(settle_fraction > 0.0 && settle_fraction < 1.0)) {
        throw ValidationError("settle fraction must lie in (0, 1)", "fraction");
    }
    if (!(settle_time_ms > 0.0)) throw ValidationError("settle time must be positive", "time");
    return settle_time_ms / std::log(1.0 / (1.0 - settle_fraction));
}

struct KineticParams {
    double tau_optical_ms = derive_tau(0.95, 40.0);
    double tau_current_ms = derive_tau(0.95, 30.0);
    double threshold_v = 2.0;

    void validate() const {
        if (!(tau_optical_ms > 0.0)) throw ValidationError("tau_optical must be positive", "tau_optical");
        if (!(tau_current_ms > 0.0)) throw ValidationError("tau_current must be positive", "tau_current");
        if (!(threshold_v > 0.0)) throw ValidationError("threshold voltage must be positive", "threshold");
    }
};

struct ContrastValue {
    double C = 0.0;
    bool clamped = false;
};

inline ContrastValue normalized_contrast(double R, double R_min, double R_max) {
    if (!(R_max > R_min)) throw ValidationError("R_max must exceed R_min", "R_max");
    double c = (R - R_min) / (R_max - R_min);
    return {std::clamp(c, 0.0, 1.0), c < 0.0 || c > 1.0};
}

struct SwitchState {
    double C = 0.0;
    double time_ms = 0.0;
    double voltage = 0.0;
};

// +1 bleach/colour towards C = 1, -1 towards 0, 0 holds (open circuit).
inline int drive_direction(double voltage, const KineticParams& p) {
    if (voltage >= p.threshold_v) return 1;
    if (voltage <= -p.threshold_v) return -1;
    return 0;
}

inline SwitchState step(const SwitchState& s, double voltage, double dt_ms, const KineticParams& p) {
    if (!(dt_ms > 0.0)) throw ValidationError("dt must be positive", "dt");
    SwitchState out{s.C, s.time_ms + dt_ms, voltage};
    int dir = drive_direction(voltage, p);
    if (dir != 0) {
        double target = dir > 0 ? 1.0 : 0.0;
        out.C += (target - s.C) * -std::expm1(-dt_ms / p.tau_optical_ms);
        out.C = std::clamp(out.C, 0.0, 1.0);
    }
    return out;
}

struct Segment {
    double voltage = 0.0;
    double duration_ms = 0.0;
};

struct Waveform {
    std::vector<Segment> segments;

    double duration_ms() const {
        double t = 0.0;
        for (const auto& s : segments) t += s.duration_ms;
        return t;
    }

    void validate() const {
        for (const auto& s : segments) {
            if (!(s.duration_ms > 0.0) || !std::isfinite(s.duration_ms)) {
                throw ValidationError("segment durations must be positive", "ms");
            }
            if (!std::isfinite(s.voltage)) throw ValidationError("segment voltage must be finite", "v");
        }
    }

    // Drive voltage at time t (segment starts are inclusive).
    double voltage_at(double t_ms) const {
        double t0 = 0.0;
        for (const auto& s : segments) {
            if (t_ms < t0 + s.duration_ms) return s.voltage;
            t0 += s.duration_ms;
        }
        return segments.empty() ? 0.0 : segments.back().voltage;
    }
};

// `cycles` periods of +v for `pulse_ms` then -v for `pulse_ms`.
inline Waveform square_wave(double v, double pulse_ms, int cycles) {
    Waveform w;
    for (int i = 0; i < cycles; ++i) {
        w.segments.push_back({v, pulse_ms});
        w.segments.push_back({-v, pulse_ms});
    }
    return w;
}

struct TracePoint {
    double t_ms = 0.0;
    double C = 0.0;
    double R = 0.0;
};

// Samples at t = dt, 2 dt, ... (end of each step); floor(total / dt)
// samples, at least one when the waveform is nonempty.
inline std::vector<TracePoint> contrast_trace(const Waveform& w, const KineticParams& p, double dt_ms,
                                              double R_min = 0.0, double R_max = 1.0,
                                              double C0 = 0.0) {
    w.validate();
    p.validate();
    if (!(dt_ms > 0.0)) throw ValidationError("dt must be positive", "dt");
    if (!(R_max > R_min)) throw ValidationError("R_max must exceed R_min", "R_max");
    std::vector<TracePoint> out;
    double total = w.duration_ms();
    if (w.segments.empty()) return out;
    auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(total / dt_ms + 1e-9)));
    // Integrate exactly across segment boundaries so the sampling step never
    // blurs a transition.
    std::vector<double> edges{0.0};
    for (const auto& s : w.segments) edges.push_back(edges.back() + s.duration_ms);
    SwitchState st{std::clamp(C0, 0.0, 1.0), 0.0, 0.0};
    std::size_t seg = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        double t_end = std::min(k * dt_ms, total);
        while (st.time_ms < t_end - 1e-12) {
            while (seg + 1 < w.segments.size() && st.time_ms >= edges[seg + 1] - 1e-12) ++seg;
            double until = std::min(t_end, edges[seg + 1]);
            if (until <= st.time_ms) until = t_end;
            st = step(st, w.segments[seg].voltage, until - st.time_ms, p);
            st.time_ms = until;
        }
        out.push_back({t_end, st.C, R_min + st.C * (R_max - R_min)});
    }
    return out;
}

struct CurrentPoint {
    double t_ms = 0.0;
    double i_norm = 0.0;
};

// Each change of drive direction starts a decaying current spike
// sign(direction) * exp(-t'/tau_current); holding draws no current.
inline std::vector<CurrentPoint> current_trace(const Waveform& w, const KineticParams& p, double dt_ms) {
    w.validate();
    p.validate();
    if (!(dt_ms > 0.0)) throw ValidationError("dt must be positive", "dt");
    std::vector<CurrentPoint> out;
    if (w.segments.empty()) return out;
    double total = w.duration_ms();
    auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(total / dt_ms + 1e-9)));
    // Transition times and directions.
    struct Edge {
        double t;
        int dir;
    };
    std::vector<Edge> edges;
    int prev = 0;
    double t0 = 0.0;
    for (const auto& s : w.segments) {
        int d = drive_direction(s.voltage, p);
        if (d != prev) edges.push_back({t0, d});
        prev = d;
        t0 += s.duration_ms;
    }
    for (std::size_t k = 0; k <= n; ++k) {
        double t = std::min(k * dt_ms, total);
        const Edge* e = nullptr;
        for (const auto& x : edges) {
            if (x.t <= t + 1e-12) e = &x;
        }
        double i = (e && e->dir != 0) ? e->dir * std::exp(-(t - e->t) / p.tau_current_ms) : 0.0;
        out.push_back({t, i});
    }
    return out;
}

struct FrameResidual {
    std::size_t frame = 0;
    double max_abs = 0.0;
    double mean_abs = 0.0;
};

struct VideoOptions {
    double frame_rate_hz = 25.0;
    // Pixels within this distance of their target are left open circuit.
    double tolerance = 1e-12;
    double initial_C = 0.0;
};

// targets[f][p]: contrast target of pixel p during frame f. A pixel off
// target relaxes towards it with tau_optical for one frame period; a pixel
// on target is held. Residuals are taken at each frame boundary.
inline std::vector<FrameResidual> simulate_video(const std::vector<std::vector<double>>& targets,
                                                 const KineticParams& p, const VideoOptions& opt = {}) {
    p.validate();
    if (!(opt.frame_rate_hz > 0.0)) throw ValidationError("frame rate must be positive", "frame_rate");
    if (targets.empty()) return {};
    std::size_t n = targets.front().size();
    for (const auto& f : targets) {
        if (f.size() != n) throw ValidationError("every frame needs the same pixel count", "targets");
        for (double t : f) {
            if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("targets must lie in [0, 1]", "targets");
        }
    }
    const double period = 1000.0 / opt.frame_rate_hz;
    const double keep = std::exp(-period / p.tau_optical_ms);
    std::vector<double> C(n, std::clamp(opt.initial_C, 0.0, 1.0));
    std::vector<FrameResidual> out;
    for (std::size_t f = 0; f < targets.size(); ++f) {
        FrameResidual r{f, 0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            double tgt = targets[f][i];
            if (std::abs(C[i] - tgt) > opt.tolerance) {
                C[i] = tgt + (C[i] - tgt) * keep;
            }
            double e = std::abs(C[i] - tgt);
            r.max_abs = std::max(r.max_abs, e);
            r.mean_abs += e;
        }
        if (n) r.mean_abs /= static_cast<double>(n);
        out.push_back(r);
    }
    return out;
}

inline void write_trace_csv(std::ostream& out, std::span<const TracePoint> t) {
    out << "t_ms,C,R\n";
    out.precision(10);
    for (const auto& p : t) out << p.t_ms << ',' << p.C << ',' << p.R << '\n';
}

inline void write_current_csv(std::ostream& out, std::span<const CurrentPoint> t) {
    out << "t_ms,i_norm\n";
    out.precision(10);
    for (const auto& p : t) out << p.t_ms << ',' << p.i_norm << '\n';
}

}  // namespace retina::dynamics
