#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mocomp/annotation.hpp"
#include "mocomp/errors.hpp"
#include "mocomp/session.hpp"

namespace mocomp {

// File names inside a package directory.
namespace package_files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kCommands = "commands.jsonl";
inline constexpr const char* kReference = "reference.jsonl";
inline constexpr const char* kExecuted = "executed.jsonl";
inline constexpr const char* kSegments = "segments.jsonl";
inline constexpr const char* kAnnotations = "annotations.json";
}  // namespace package_files

struct Manifest {
  std::string session_id;
  std::string created_at;  // ISO-8601 UTC
  Recipe recipe;
  std::uint64_t seed = 0;
  int command_hz = 20;
  int telemetry_hz = 50;
  std::size_t joints_dim = 0;
  std::string backend_name;
  std::string registry_hash;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct PackageSegment {
  SegmentTag tag;
  SegmentIntent intent;

  friend bool operator==(const PackageSegment&, const PackageSegment&) = default;
};

struct SessionPackage {
  Manifest manifest;
  std::vector<MetaCommand> commands;
  std::vector<TelemetrySample> reference;
  std::vector<TelemetrySample> executed;
  std::vector<PackageSegment> segments;
  AnnotationSet annotations;

  friend bool operator==(const SessionPackage&, const SessionPackage&) = default;
};

struct Violation {
  std::string name;     // e.g. "segment_gap"
  std::string file;     // package-relative file the violation points at
  std::size_t line = 0; // 1-based record line, 0 when not line specific
  std::string message;
};

std::string to_string(const Violation& v);

class AlignmentError : public Error {
 public:
  explicit AlignmentError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Combined hash of the registry and banks used to annotate.
std::string content_hash(const Registry& registry, const Banks& banks);

// Assembles the in-memory package for a finished recording.
SessionPackage make_package(const Registry& registry, const Banks& banks, const Recording& recording,
                            const AnnotationSet& annotations, std::string created_at);

// Validates, then writes atomically (temp directory + rename), replacing any
// existing directory at `dir`. Throws AlignmentError, IoError.
void write_package(const SessionPackage& pkg, const std::filesystem::path& dir);

// Parses a package directory without validating. Throws IoError, ParseError.
SessionPackage read_package(const std::filesystem::path& dir);

// read_package + validate. Throws AlignmentError when violations exist.
SessionPackage load_package(const std::filesystem::path& dir, const Registry* registry = nullptr,
                            const Banks* banks = nullptr);

// Empty iff every package invariant holds. When registry and banks are given
// the stored hash is checked against them and intents are re-derived.
std::vector<Violation> validate(const SessionPackage& pkg, const Registry* registry = nullptr,
                                const Banks* banks = nullptr);

}  // namespace mocomp
