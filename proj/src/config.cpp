#include "qsteer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace qsteer {

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::decoherence: return "decoherence";
        case Mode::target: return "target";
        case Mode::composite: return "composite";
        case Mode::feedback: return "feedback";
        case Mode::compare: return "compare";
    }
    return "?";
}

Mode mode_from_string(std::string_view s) {
    for (Mode m : {Mode::decoherence, Mode::target, Mode::composite, Mode::feedback, Mode::compare}) {
        if (s == to_string(m)) return m;
    }
    throw ParseError("unknown mode '" + std::string(s) + "'");
}

FeedbackConfig FeedbackRun::effective() const {
    FeedbackConfig out = cfg;
    if (params_from_target && with_feedback) {
        const FeedbackParams p = feedback_params_for_target(target_theta, cfg.gamma);
        out.alpha = p.alpha;
        out.lambda = p.lambda;
    }
    if (!with_feedback) out.lambda = 0.0;
    return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_plain(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || ptr != end) {
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    }
    return v;
}

std::string format_real(double v) {
    // shortest text that parses back to the same double
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

double parse_real(std::string_view text) {
    std::string_view s = trim(text);
    const auto pi_pos = s.find("pi");
    if (pi_pos == std::string_view::npos) return parse_plain(s);

    // [sign][factor*]pi[/divisor]
    double factor = 1.0;
    std::string_view head = trim(s.substr(0, pi_pos));
    if (!head.empty()) {
        if (head == "-") {
            factor = -1.0;
        } else if (head == "+") {
            factor = 1.0;
        } else if (head.back() == '*') {
            factor = parse_plain(head.substr(0, head.size() - 1));
        } else {
            throw std::invalid_argument("not a number: '" + std::string(s) + "'");
        }
    }
    double value = factor * std::numbers::pi;
    std::string_view tail = trim(s.substr(pi_pos + 2));
    if (!tail.empty()) {
        if (tail.front() != '/') throw std::invalid_argument("not a number: '" + std::string(s) + "'");
        const double div = parse_plain(tail.substr(1));
        if (div == 0.0) throw std::invalid_argument("division by zero in '" + std::string(s) + "'");
        value /= div;
    }
    return value;
}

std::pair<std::string, std::string> parse_override(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) {
        throw ParseError("override '" + std::string(kv) + "' is not of the form key=value");
    }
    const std::string key(trim(kv.substr(0, eq)));
    const std::string value(trim(kv.substr(eq + 1)));
    if (key.empty()) throw ParseError("override '" + std::string(kv) + "' has an empty key");
    return {key, value};
}

namespace {

struct Entry {
    std::string value;
    std::string where;  // "line N" or "--set"
};

// Hands out typed values, remembers which keys the mode accepts and records
// the resolved value of each emitted key.
class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    const Entry* find(const std::string& key) {
        allowed_.insert(key);
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    template <typename T, typename Parse>
    T get(const std::string& key, T fallback, Parse parse) {
        const Entry* e = find(key);
        if (!e) return fallback;
        try {
            return parse(e->value);
        } catch (const std::exception& ex) {
            throw ParseError(e->where + ": key '" + key + "': " + ex.what());
        }
    }

    double real(const std::string& key, double fallback) {
        return get<double>(key, fallback, [](const std::string& v) { return parse_real(v); });
    }

    long long integer(const std::string& key, long long fallback) {
        return get<long long>(key, fallback, [](const std::string& v) {
            long long out = 0;
            const std::string_view s = trim(v);
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
                throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
            }
            return out;
        });
    }

    bool boolean(const std::string& key, bool fallback) {
        return get<bool>(key, fallback, [](const std::string& v) {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw std::invalid_argument("not a boolean: '" + v + "'");
        });
    }

    std::optional<double> optional_real(const std::string& key) {
        const Entry* e = find(key);
        if (!e || e->value == "none") return std::nullopt;
        return real(key, 0.0);
    }

    void emit(const std::string& key, const std::string& value) {
        resolved_ << key << " = " << value << '\n';
    }
    void emit(const std::string& key, double value) { emit(key, format_real(value)); }
    void emit_int(const std::string& key, long long value) { emit(key, std::to_string(value)); }
    void emit_bool(const std::string& key, bool value) { emit(key, value ? "true" : "false"); }
    void emit(const std::string& key, const std::optional<double>& value) {
        emit(key, value ? format_real(*value) : std::string("none"));
    }
    void comment(const std::string& text) { resolved_ << "# " << text << '\n'; }

    void reject_unknown(Mode mode) const {
        for (const auto& [key, entry] : entries_) {
            if (allowed_.count(key)) continue;
            std::string best;
            std::size_t best_d = std::string::npos;
            for (const auto& candidate : allowed_) {
                const std::size_t d = edit_distance(key, candidate);
                if (d < best_d) {
                    best_d = d;
                    best = candidate;
                }
            }
            std::string msg = entry.where + ": unknown key '" + key + "' for mode " +
                              std::string(to_string(mode));
            if (!best.empty() && best_d <= std::max<std::size_t>(2, key.size() / 3)) {
                msg += "; did you mean '" + best + "'?";
            }
            throw ParseError(msg);
        }
    }

    std::string resolved() const { return resolved_.str(); }

private:
    std::map<std::string, Entry> entries_;
    std::set<std::string> allowed_;
    std::ostringstream resolved_;
};

ControlAxis parse_axis(const std::string& v) {
    if (v == "x") return ControlAxis::sigma_x();
    if (v == "y") return ControlAxis::sigma_y();
    if (v.rfind("phi:", 0) == 0) return ControlAxis::from_azimuth(parse_real(v.substr(4)));
    throw std::invalid_argument("axis must be x, y or phi:<radians>, got '" + v + "'");
}

std::string format_axis(const ControlAxis& a) {
    if (a.cx == 1.0 && a.cy == 0.0) return "x";
    if (a.cx == 0.0 && a.cy == 1.0) return "y";
    return "phi:" + format_real(a.azimuth());
}

Interpolation parse_interpolation(const std::string& v) {
    if (v == "great_circle") return Interpolation::great_circle;
    if (v == "chordal") return Interpolation::chordal;
    throw std::invalid_argument("interpolation must be great_circle or chordal");
}

std::string_view to_string(Interpolation i) {
    return i == Interpolation::great_circle ? "great_circle" : "chordal";
}

ArcDirection parse_direction(const std::string& v) {
    if (v == "shorter") return ArcDirection::shorter;
    if (v == "positive") return ArcDirection::positive;
    if (v == "negative") return ArcDirection::negative;
    throw std::invalid_argument("direction must be shorter, positive or negative");
}

std::string_view to_string(ArcDirection d) {
    switch (d) {
        case ArcDirection::shorter: return "shorter";
        case ArcDirection::positive: return "positive";
        case ArcDirection::negative: return "negative";
    }
    return "?";
}

FeedbackRunKind parse_kind(const std::string& v) {
    if (v == "trajectory") return FeedbackRunKind::trajectory;
    if (v == "ensemble") return FeedbackRunKind::ensemble;
    if (v == "master") return FeedbackRunKind::master;
    throw std::invalid_argument("kind must be trajectory, ensemble or master");
}

std::string_view to_string(FeedbackRunKind k) {
    switch (k) {
        case FeedbackRunKind::trajectory: return "trajectory";
        case FeedbackRunKind::ensemble: return "ensemble";
        case FeedbackRunKind::master: return "master";
    }
    return "?";
}

Regime parse_regime(const std::string& v) { return regime_from_string(v); }

SpectralConfig read_spectral(Reader& r) {
    SpectralConfig s;
    s.coupling_gamma = r.real("spectral.coupling_gamma", s.coupling_gamma);
    s.beta0 = r.real("spectral.beta0", s.beta0);
    s.omega_c = r.real("spectral.omega_c", s.omega_c);
    s.omega_12 = r.real("spectral.omega_12", s.omega_12);
    s.spectral_exponent = r.real("spectral.s", s.spectral_exponent);
    r.emit("spectral.coupling_gamma", s.coupling_gamma);
    r.emit("spectral.beta0", s.beta0);
    r.emit("spectral.omega_c", s.omega_c);
    r.emit("spectral.omega_12", s.omega_12);
    r.emit("spectral.s", s.spectral_exponent);
    return s;
}

// Targeting keys. With a prefix ("leg1.") the unprefixed key is accepted as a
// shared fallback; only the prefixed form is echoed.
TargetingConfig read_targeting(Reader& r, const std::string& prefix, TargetingConfig d) {
    auto lookup = [&](const std::string& key) -> std::string {
        if (prefix.empty()) return key;
        if (r.find(prefix + key)) return prefix + key;
        if (r.find(key)) return key;
        return prefix + key;
    };
    TargetingConfig c = d;
    c.regime = r.get<Regime>(lookup("regime"), d.regime, parse_regime);
    c.axis = r.get<ControlAxis>(lookup("axis"), d.axis, parse_axis);
    c.n_intermediates = static_cast<int>(r.integer(lookup("n_intermediates"), d.n_intermediates));
    c.cycles_per_intermediate =
        static_cast<int>(r.integer(lookup("cycles_per_intermediate"), d.cycles_per_intermediate));
    c.i_max = r.real(lookup("i_max"), d.i_max);
    c.dt = r.real(lookup("dt"), d.dt);
    c.initial.theta = r.real(lookup("initial.theta"), d.initial.theta);
    c.initial.phi = r.real(lookup("initial.phi"), d.initial.phi);
    c.target.theta = r.real(lookup("target.theta"), d.target.theta);
    c.target.phi = r.real(lookup("target.phi"), d.target.phi);
    c.hold_cycles = static_cast<int>(r.integer(lookup("hold_cycles"), d.hold_cycles));
    c.fidelity_threshold = r.real(lookup("fidelity_threshold"), d.fidelity_threshold);
    c.interpolation = r.get<Interpolation>(lookup("interpolation"), d.interpolation, parse_interpolation);
    c.direction = r.get<ArcDirection>(lookup("direction"), d.direction, parse_direction);

    r.emit(prefix + "regime", std::string(to_string(c.regime)));
    r.emit(prefix + "axis", format_axis(c.axis));
    r.emit_int(prefix + "n_intermediates", c.n_intermediates);
    r.emit_int(prefix + "cycles_per_intermediate", c.cycles_per_intermediate);
    r.emit(prefix + "i_max", c.i_max);
    r.emit(prefix + "dt", c.dt);
    r.emit(prefix + "initial.theta", c.initial.theta);
    r.emit(prefix + "initial.phi", c.initial.phi);
    r.emit(prefix + "target.theta", c.target.theta);
    r.emit(prefix + "target.phi", c.target.phi);
    r.emit_int(prefix + "hold_cycles", c.hold_cycles);
    r.emit(prefix + "fidelity_threshold", c.fidelity_threshold);
    r.emit(prefix + "interpolation", std::string(to_string(c.interpolation)));
    r.emit(prefix + "direction", std::string(to_string(c.direction)));
    return c;
}

// Feedback keys; `with_states` is false for compare, where the endpoints and
// plane come from the open-loop section.
FeedbackRun read_feedback(Reader& r, bool with_states) {
    FeedbackRun f;
    FeedbackConfig& c = f.cfg;
    c.gamma = r.real("feedback.gamma", c.gamma);
    f.params_from_target = r.get<bool>("feedback.params", true, [](const std::string& v) {
        if (v == "target") return true;
        if (v == "manual") return false;
        throw std::invalid_argument("params must be target or manual");
    });
    c.alpha = r.real("feedback.alpha", c.alpha);
    c.lambda = r.real("feedback.lambda", c.lambda);
    c.eta = r.real("feedback.eta", c.eta);
    c.delay = r.real("feedback.delay", c.delay);
    c.dt = r.real("feedback.dt", c.dt);
    c.master_dt = r.real("feedback.master_dt", c.master_dt);
    c.sample_interval = r.real("feedback.sample_interval", c.sample_interval);
    const long long seed = r.integer("feedback.seed", static_cast<long long>(c.seed));
    const long long n_traj = r.integer("feedback.n_traj", static_cast<long long>(c.n_traj));
    if (seed < 0) throw ValidationError("feedback.seed must be >= 0");
    if (n_traj < 1) throw ValidationError("feedback.n_traj must be >= 1");
    c.seed = static_cast<std::uint64_t>(seed);
    c.n_traj = static_cast<std::size_t>(n_traj);
    f.t_end = r.real("feedback.t_end", f.t_end);
    f.with_feedback = r.boolean("feedback.enabled", f.with_feedback);
    f.kind = r.get<FeedbackRunKind>("feedback.kind", f.kind, parse_kind);
    if (with_states) {
        c.phi = r.real("feedback.phi", c.phi);
        f.initial_theta = r.real("initial.theta", f.initial_theta);
        f.target_theta = r.real("target.theta", f.target_theta);
    }

    r.emit("feedback.gamma", c.gamma);
    r.emit("feedback.params", f.params_from_target ? "target" : "manual");
    r.emit("feedback.alpha", c.alpha);
    r.emit("feedback.lambda", c.lambda);
    r.emit("feedback.eta", c.eta);
    r.emit("feedback.delay", c.delay);
    r.emit("feedback.dt", c.dt);
    r.emit("feedback.master_dt", c.master_dt);
    r.emit("feedback.sample_interval", c.sample_interval);
    r.emit_int("feedback.seed", static_cast<long long>(c.seed));
    r.emit_int("feedback.n_traj", static_cast<long long>(c.n_traj));
    r.emit("feedback.t_end", f.t_end);
    r.emit_bool("feedback.enabled", f.with_feedback);
    r.emit("feedback.kind", std::string(to_string(f.kind)));
    if (with_states) {
        r.emit("feedback.phi", c.phi);
        r.emit("initial.theta", f.initial_theta);
        r.emit("target.theta", f.target_theta);
    }
    return f;
}

template <typename F>
void validated(const std::string& section, F&& check) {
    try {
        check();
    } catch (const ValidationError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ValidationError(section + ": " + e.what());
    }
}

void validate_feedback(const FeedbackRun& f) {
    validated("feedback", [&] {
        if (!(f.t_end > 0.0)) throw std::invalid_argument("t_end must be > 0");
        if (f.kind == FeedbackRunKind::ensemble && f.cfg.n_traj < 2) {
            throw std::invalid_argument("ensemble runs need n_traj >= 2");
        }
        f.effective().validate();
    });
}

}  // namespace

RunSpec parse_config(Mode mode, std::string_view text,
                     const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::map<std::string, Entry> entries;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(where + ": expected 'key = value', got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(where + ": empty key");
        if (value.empty()) throw ParseError(where + ": key '" + key + "' has no value");
        if (entries.count(key)) {
            throw ParseError(where + ": duplicate key '" + key + "' (first set on " +
                             entries[key].where + ")");
        }
        entries[key] = {value, where};
    }
    for (const auto& [key, value] : overrides) {
        if (value.empty()) throw ParseError("--set: key '" + key + "' has no value");
        entries[key] = {value, "--set"};
    }

    Reader r(std::move(entries));
    RunSpec spec;
    spec.mode = mode;
    spec.overrides = overrides;
    r.comment("resolved configuration, mode " + std::string(to_string(mode)));

    switch (mode) {
        case Mode::decoherence: {
            DecoherenceRun& d = spec.decoherence;
            d.regime = r.get<Regime>("regime", d.regime, parse_regime);
            d.dt = r.real("dt", d.dt);
            const long long n = r.integer("n_samples", static_cast<long long>(d.n_samples));
            if (n < 1) throw ValidationError("n_samples must be >= 1");
            d.n_samples = static_cast<std::size_t>(n);
            r.emit("regime", std::string(to_string(d.regime)));
            r.emit("dt", d.dt);
            r.emit_int("n_samples", n);
            d.spectral = read_spectral(r);
            validated("decoherence", [&] {
                if (!(d.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
                d.spectral.validate();
            });
            break;
        }
        case Mode::target:
        case Mode::compare: {
            spec.targeting = read_targeting(r, "", TargetingConfig{});
            spec.targeting.spectral = read_spectral(r);
            validated("target", [&] { spec.targeting.validate(); });
            if (mode == Mode::compare) {
                spec.feedback = read_feedback(r, false);
                // Same endpoints and plane as the open-loop drive.
                spec.feedback.cfg.phi = spec.targeting.axis.azimuth();
                spec.feedback.initial_theta = in_plane_angle(spec.targeting.initial, spec.feedback.cfg.phi);
                spec.feedback.target_theta = in_plane_angle(spec.targeting.target, spec.feedback.cfg.phi);
                validate_feedback(spec.feedback);
            }
            break;
        }
        case Mode::composite: {
            TargetingConfig d1;
            d1.initial = {std::numbers::pi / 2, 0.0};
            d1.target = {std::numbers::pi, 0.0};
            d1.hold_cycles = 0;
            TargetingConfig d2;
            d2.axis = ControlAxis::sigma_x();
            d2.initial = {std::numbers::pi, std::numbers::pi / 2};
            d2.target = {std::numbers::pi / 2, std::numbers::pi / 2};
            spec.leg1 = read_targeting(r, "leg1.", d1);
            spec.leg2 = read_targeting(r, "leg2.", d2);
            const SpectralConfig s = read_spectral(r);
            spec.leg1.spectral = s;
            spec.leg2.spectral = s;
            validated("leg1", [&] { spec.leg1.validate(); });
            validated("leg2", [&] { spec.leg2.validate(); });
            break;
        }
        case Mode::feedback:
            spec.feedback = read_feedback(r, true);
            validate_feedback(spec.feedback);
            break;
    }

    if (mode != Mode::decoherence) {
        spec.require.final_fidelity = r.optional_real("require.final_fidelity");
        spec.require.max_transition = r.optional_real("require.max_transition");
        r.emit("require.final_fidelity", spec.require.final_fidelity);
        r.emit("require.max_transition", spec.require.max_transition);
        if (mode == Mode::feedback || mode == Mode::compare) {
            spec.require.min_purity = r.optional_real("require.min_purity");
            r.emit("require.min_purity", spec.require.min_purity);
        }
    }
    r.reject_unknown(mode);
    spec.resolved = r.resolved();
    return spec;
}

}  // namespace qsteer
