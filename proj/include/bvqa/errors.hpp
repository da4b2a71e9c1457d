#pragma once

#include <stdexcept>
#include <string>

namespace bvqa {

/// A message arrived out of order, malformed, or violating a protocol
/// invariant. Raised instead of leaving the session in an undefined state.
class protocol_error : public std::runtime_error {
  public:
    explicit protocol_error(const std::string& what) : std::runtime_error(what) {}
};

/// The lossy channel exceeded its retransmission cap.
class channel_fault : public std::runtime_error {
  public:
    explicit channel_fault(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid experiment or circuit configuration.
class config_error : public std::runtime_error {
  public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bvqa
