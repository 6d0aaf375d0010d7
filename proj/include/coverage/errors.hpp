#pragma once

#include <stdexcept>
#include <string>

namespace coverage {

// Malformed input: schema, manifest, CLI flags, session config.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An item lacks a label that an operation needs (truth in simulation mode,
// or a slot referenced by a pattern).
class PartialLabelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The answer source could not produce an aggregate (unknown item, replay
// miss, task asked twice, ...).
class AnswerSourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace coverage
