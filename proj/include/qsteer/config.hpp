// config.hpp
// Flat `key = value` run configuration. Lines starting with '#' are comments;
// values may use `pi` (e.g. `3*pi/4`). Each mode accepts a fixed key set and
// rejects everything else.

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsteer/controller.hpp"
#include "qsteer/decoherence.hpp"
#include "qsteer/feedback.hpp"

namespace qsteer {

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

enum class Mode { decoherence, target, composite, feedback, compare };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

struct DecoherenceRun {
    Regime regime = Regime::thermal;
    SpectralConfig spectral{};
    double dt = 1e-3;
    std::size_t n_samples = 9;
};

enum class FeedbackRunKind { trajectory, ensemble, master };

struct FeedbackRun {
    FeedbackConfig cfg{};
    FeedbackRunKind kind = FeedbackRunKind::trajectory;
    double initial_theta = std::numbers::pi;  // ground
    double target_theta = 0.0;                // excited
    double t_end = 10.0;
    bool with_feedback = true;
    bool params_from_target = true;  // derive alpha/lambda from target_theta

    PureStateAngle initial() const { return {initial_theta, cfg.phi}; }
    PureStateAngle target() const { return {target_theta, cfg.phi}; }
    // Copy of cfg with alpha/lambda resolved.
    FeedbackConfig effective() const;
};

// Pass/fail thresholds checked after the run. Unset values are not checked.
struct Requirements {
    std::optional<double> final_fidelity;
    std::optional<double> max_transition;  // steps (open loop) or 1/gamma (feedback)
    std::optional<double> min_purity;
};

struct RunSpec {
    Mode mode = Mode::target;
    std::filesystem::path config_path;  // empty when no file was given
    std::filesystem::path out_dir;
    std::vector<std::pair<std::string, std::string>> overrides;

    DecoherenceRun decoherence{};
    TargetingConfig targeting{};  // target and compare
    TargetingConfig leg1{};       // composite
    TargetingConfig leg2{};
    FeedbackRun feedback{};  // feedback and compare
    Requirements require{};

    // Canonical `key = value` text of every key the mode reads, defaults
    // included; parsing it back yields the same spec.
    std::string resolved;
};

// Parses `text` (the config document) with `overrides` applied on top.
// Throws ParseError for malformed lines, duplicate or unknown keys (with the
// closest valid key suggested) and unparsable values, and ValidationError
// when the resulting configuration violates an invariant.
RunSpec parse_config(Mode mode, std::string_view text,
                     const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Parses `key=value` as given to --set.
std::pair<std::string, std::string> parse_override(std::string_view kv);

// Parses a real number, allowing `pi` factors: "0.5", "pi", "-pi/2", "3*pi/4".
double parse_real(std::string_view text);

// Levenshtein distance, used for key suggestions.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace qsteer
