#pragma once

#include <stdexcept>
#include <string>

namespace mbhgcn {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedLine : std::runtime_error {
  int line_no;
  MalformedLine(int line, const std::string& detail)
      : std::runtime_error("malformed line " + std::to_string(line) + ": " + detail),
        line_no(line) {}
};

struct UnknownBehavior : std::runtime_error {
  std::string label;
  int line_no;
  UnknownBehavior(std::string lbl, int line)
      : std::runtime_error("unknown behavior '" + lbl + "' at line " + std::to_string(line)),
        label(std::move(lbl)),
        line_no(line) {}
};

struct EmptyTargetBehavior : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotEnoughTestUsers : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidRate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SizeLimitExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model file and dataset bundle disagree on shapes (M, N, K or d).
struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mbhgcn
