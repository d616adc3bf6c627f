#include "mocomp/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace mocomp {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "mocomp.package/1";

std::string join_messages(const std::vector<Violation>& vs) {
  std::string out = fmt::format("{} package violation(s)", vs.size());
  for (const auto& v : vs) out += "\n  " + to_string(v);
  return out;
}

ordered_json manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["format"] = kFormat;
  j["session_id"] = m.session_id;
  j["created_at"] = m.created_at;
  j["recipe"] = recipe_to_json(m.recipe);
  j["seed"] = m.seed;
  j["rates"] = {{"command_hz", m.command_hz}, {"telemetry_hz", m.telemetry_hz}};
  j["joints_dim"] = m.joints_dim;
  j["backend_name"] = m.backend_name;
  j["registry_hash"] = m.registry_hash;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.session_id = j.at("session_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  try {
    m.recipe = recipe_from_json(j.at("recipe"));
  } catch (const InvalidRecipe& e) {
    throw ParseError(std::string("manifest.json: recipe: ") + e.what());
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  m.command_hz = j.at("rates").at("command_hz").get<int>();
  m.telemetry_hz = j.at("rates").at("telemetry_hz").get<int>();
  m.joints_dim = j.at("joints_dim").get<std::size_t>();
  m.backend_name = j.at("backend_name").get<std::string>();
  m.registry_hash = j.at("registry_hash").get<std::string>();
  return m;
}

ordered_json segment_to_json(const PackageSegment& s) {
  ordered_json j;
  j["index"] = s.tag.index;
  j["mode"] = s.tag.mode;
  j["start_ms"] = s.tag.start_ms;
  j["end_ms"] = s.tag.end_ms;
  j["intent"] = intent_to_json(s.intent);
  return j;
}

PackageSegment segment_from_json(const json& j) {
  PackageSegment s;
  s.tag.index = j.at("index").get<int>();
  s.tag.mode = j.at("mode").get<int>();
  s.tag.start_ms = j.at("start_ms").get<std::int64_t>();
  s.tag.end_ms = j.at("end_ms").get<std::int64_t>();
  s.intent = intent_from_json(j.at("intent"));
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw IoError("short write to " + p.string());
}

// Calls `fn(line_text_with_newline, line_number)` for every record line.
template <class Fn>
void for_each_record(const std::string& text, const char* file, Fn fn) {
  std::size_t pos = 0;
  std::size_t line = 0;
  while (pos < text.size()) {
    ++line;
    const auto nl = text.find('\n', pos);
    const std::string_view rec =
        nl == std::string::npos ? std::string_view(text).substr(pos) : std::string_view(text).substr(pos, nl - pos + 1);
    try {
      fn(rec, line);
    } catch (const Error& e) {
      throw ParseError(fmt::format("{}:{}: {}", file, line, e.what()));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", file, line, e.what()));
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
}

template <class T>
std::vector<T> parse_stream(const fs::path& dir, const char* file, T (*decode)(std::string_view)) {
  std::vector<T> out;
  for_each_record(slurp(dir / file), file, [&](std::string_view rec, std::size_t) { out.push_back(decode(rec)); });
  return out;
}

template <class T>
std::string encode_stream(const std::vector<T>& items, std::string (*encode)(const T&)) {
  std::string out;
  for (const auto& x : items) out += encode(x);
  return out;
}

void check_timeline(std::vector<Violation>& out, const char* file, const std::vector<std::int64_t>& ts,
                    std::int64_t period) {
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] % period != 0) {
      out.push_back({"rate_mismatch", file, i + 1, fmt::format("timestamp {} is off the {} ms grid", ts[i], period)});
    }
    if (i == 0) continue;
    if (ts[i] <= ts[i - 1]) {
      out.push_back({"timestamp_order", file, i + 1, fmt::format("timestamp {} after {}", ts[i], ts[i - 1])});
    } else if (ts[i] - ts[i - 1] != period) {
      out.push_back({"rate_mismatch", file, i + 1,
                     fmt::format("gap of {} ms, expected {} ms", ts[i] - ts[i - 1], period)});
    }
  }
}

template <class T>
std::vector<std::int64_t> timestamps(const std::vector<T>& v) {
  std::vector<std::int64_t> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(x.timestamp_ms);
  return out;
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

bool same_intent(const SegmentIntent& a, const SegmentIntent& b) {
  if (a.mode_index != b.mode_index || a.movement != b.movement) return false;
  if (a.turn_deg.has_value() != b.turn_deg.has_value()) return false;
  if (a.turn_deg && !near(*a.turn_deg, *b.turn_deg)) return false;
  if (a.height.has_value() != b.height.has_value()) return false;
  if (a.height && !near(*a.height, *b.height)) return false;
  return near(a.speed, b.speed) && near(a.duration_s, b.duration_s);
}

std::vector<MetaCommand> commands_in(const std::vector<MetaCommand>& cmds, const SegmentTag& tag) {
  std::vector<MetaCommand> out;
  for (const auto& c : cmds) {
    if (c.timestamp_ms >= tag.start_ms && c.timestamp_ms < tag.end_ms) out.push_back(c);
  }
  return out;
}

}  // namespace

std::string to_string(const Violation& v) {
  if (v.line > 0) return fmt::format("{} [{}:{}] {}", v.name, v.file, v.line, v.message);
  return fmt::format("{} [{}] {}", v.name, v.file, v.message);
}

AlignmentError::AlignmentError(std::vector<Violation> violations)
    : Error(join_messages(violations)), violations_(std::move(violations)) {}

std::string content_hash(const Registry& registry, const Banks& banks) {
  return fnv1a_hex(registry.canonical_text() + "\n" + banks.canonical_text());
}

SessionPackage make_package(const Registry& registry, const Banks& banks, const Recording& recording,
                            const AnnotationSet& annotations, std::string created_at) {
  SessionPackage pkg;
  pkg.manifest.session_id = recording.session_id;
  pkg.manifest.created_at = std::move(created_at);
  pkg.manifest.recipe = recording.recipe;
  pkg.manifest.seed = annotations.seed;
  pkg.manifest.joints_dim = recording.joints_dim;
  pkg.manifest.backend_name = recording.backend_name;
  pkg.manifest.registry_hash = content_hash(registry, banks);
  pkg.commands = recording.commands;
  pkg.reference = recording.reference;
  pkg.executed = recording.executed;
  for (const auto& tag : recording.segments) {
    pkg.segments.push_back({tag, derive_intent(registry, commands_in(recording.commands, tag), tag)});
  }
  pkg.annotations = annotations;
  return pkg;
}

void write_package(const SessionPackage& pkg, const fs::path& dir) {
  if (auto vs = validate(pkg); !vs.empty()) throw AlignmentError(std::move(vs));

  const fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  const fs::path tmp = parent / ("." + dir.filename().string() + ".partial");
  std::error_code ec;
  fs::create_directories(parent, ec);
  fs::remove_all(tmp, ec);
  if (!fs::create_directories(tmp, ec) || ec) throw IoError("cannot create " + tmp.string());

  spit(tmp / package_files::kManifest, manifest_to_json(pkg.manifest).dump(2) + "\n");
  spit(tmp / package_files::kCommands, encode_stream(pkg.commands, &encode_command));
  spit(tmp / package_files::kReference, encode_stream(pkg.reference, &encode_telemetry));
  spit(tmp / package_files::kExecuted, encode_stream(pkg.executed, &encode_telemetry));
  std::string segs;
  for (const auto& s : pkg.segments) segs += segment_to_json(s).dump() + "\n";
  spit(tmp / package_files::kSegments, segs);
  spit(tmp / package_files::kAnnotations, annotations_to_text(pkg.annotations));

  fs::remove_all(dir, ec);
  if (ec) throw IoError(fmt::format("cannot replace {}: {}", dir.string(), ec.message()));
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError(fmt::format("cannot move package into {}: {}", dir.string(), ec.message()));
}

SessionPackage read_package(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  if (!fs::exists(dir / package_files::kManifest)) {
    throw ParseError(fmt::format("{} is not a package (no {})", dir.string(), package_files::kManifest));
  }
  SessionPackage pkg;
  const json manifest = json::parse(slurp(dir / package_files::kManifest), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object() || manifest.value("format", "") != kFormat) {
    throw ParseError(fmt::format("{}: not a {} manifest", package_files::kManifest, kFormat));
  }
  try {
    pkg.manifest = manifest_from_json(manifest);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: {}", package_files::kManifest, e.what()));
  }
  for (const char* f : {package_files::kCommands, package_files::kReference, package_files::kExecuted,
                        package_files::kSegments, package_files::kAnnotations}) {
    if (!fs::exists(dir / f)) throw ParseError(fmt::format("{}: missing {}", dir.string(), f));
  }
  pkg.commands = parse_stream(dir, package_files::kCommands, &decode_command);
  pkg.reference = parse_stream(dir, package_files::kReference, &decode_telemetry);
  pkg.executed = parse_stream(dir, package_files::kExecuted, &decode_telemetry);
  for_each_record(slurp(dir / package_files::kSegments), package_files::kSegments,
                  [&](std::string_view rec, std::size_t) {
                    const json j = json::parse(rec);
                    pkg.segments.push_back(segment_from_json(j));
                  });
  try {
    pkg.annotations = annotations_from_text(slurp(dir / package_files::kAnnotations));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", package_files::kAnnotations, e.what()));
  }
  return pkg;
}

SessionPackage load_package(const fs::path& dir, const Registry* registry, const Banks* banks) {
  SessionPackage pkg = read_package(dir);
  if (auto vs = validate(pkg, registry, banks); !vs.empty()) throw AlignmentError(std::move(vs));
  return pkg;
}

std::vector<Violation> validate(const SessionPackage& pkg, const Registry* registry, const Banks* banks) {
  using namespace package_files;
  std::vector<Violation> out;
  const auto& m = pkg.manifest;

  if (m.command_hz != kCommandHz || m.telemetry_hz != kTelemetryHz) {
    out.push_back({"rate_mismatch", kManifest, 0,
                   fmt::format("rates {}/{} Hz, expected {}/{} Hz", m.command_hz, m.telemetry_hz, kCommandHz,
                               kTelemetryHz)});
  }
  if (pkg.segments.empty()) {
    out.push_back({"segment_coverage", kSegments, 0, "package has no segments"});
    return out;
  }

  check_timeline(out, kCommands, timestamps(pkg.commands), kCommandPeriodMs);
  check_timeline(out, kReference, timestamps(pkg.reference), kTelemetryPeriodMs);
  check_timeline(out, kExecuted, timestamps(pkg.executed), kTelemetryPeriodMs);

  for (const auto* stream : {&pkg.reference, &pkg.executed}) {
    const char* file = stream == &pkg.reference ? kReference : kExecuted;
    for (std::size_t i = 0; i < stream->size(); ++i) {
      if ((*stream)[i].joints.size() != m.joints_dim) {
        out.push_back({"joints_dim", file, i + 1,
                       fmt::format("{} joints, manifest says {}", (*stream)[i].joints.size(), m.joints_dim)});
        break;
      }
    }
  }

  // Segment partition.
  const auto& segs = pkg.segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& t = segs[i].tag;
    if (t.index != static_cast<int>(i)) {
      out.push_back({"segment_index", kSegments, i + 1, fmt::format("index {} at position {}", t.index, i)});
    }
    if (t.end_ms <= t.start_ms) {
      out.push_back({"segment_empty", kSegments, i + 1, fmt::format("[{}, {}) is empty", t.start_ms, t.end_ms)});
    }
    if (i == 0) continue;
    const auto prev_end = segs[i - 1].tag.end_ms;
    if (t.start_ms > prev_end) {
      out.push_back({"segment_gap", kSegments, i + 1,
                     fmt::format("gap [{}, {}) after segment {}", prev_end, t.start_ms, i - 1)});
    } else if (t.start_ms < prev_end) {
      out.push_back({"segment_overlap", kSegments, i + 1,
                     fmt::format("segment starts at {} before segment {} ends at {}", t.start_ms, i - 1, prev_end)});
    }
  }
  const std::int64_t first_ms = segs.front().tag.start_ms;
  const std::int64_t last_ms = segs.back().tag.end_ms;

  // Stream coverage of [first_ms, last_ms).
  for (const auto* stream : {&pkg.reference, &pkg.executed}) {
    const char* file = stream == &pkg.reference ? kReference : kExecuted;
    if (stream->empty()) {
      out.push_back({"count_mismatch", file, 0, "no samples"});
      continue;
    }
    const auto front = stream->front().timestamp_ms;
    const auto back = stream->back().timestamp_ms;
    if (front < first_ms || front >= first_ms + kTelemetryPeriodMs) {
      out.push_back({"segment_coverage", file, 1, fmt::format("first sample at {} ms, segments start at {} ms", front,
                                                             first_ms)});
    }
    if (back >= last_ms || back < last_ms - kTelemetryPeriodMs) {
      out.push_back({"segment_coverage", file, stream->size(),
                     fmt::format("last sample at {} ms, segments end at {} ms", back, last_ms)});
    }
  }
  if (!pkg.commands.empty()) {
    const auto front = pkg.commands.front().timestamp_ms;
    const auto back = pkg.commands.back().timestamp_ms;
    if (front < first_ms || front >= first_ms + kCommandPeriodMs || back >= last_ms ||
        back < last_ms - kCommandPeriodMs) {
      out.push_back({"segment_coverage", kCommands, 0,
                     fmt::format("commands span [{}, {}] ms, segments [{}, {}) ms", front, back, first_ms, last_ms)});
    }
  } else {
    out.push_back({"count_mismatch", kCommands, 0, "no commands"});
  }

  // Counts.
  const double total_s = static_cast<double>(last_ms - first_ms) / 1000.0;
  const auto slack = static_cast<long long>(segs.size());
  const auto expect_samples = std::llround(total_s * kTelemetryHz);
  const auto expect_commands = static_cast<long long>(command_ticks_in(first_ms, last_ms));
  const auto n_ref = static_cast<long long>(pkg.reference.size());
  const auto n_exe = static_cast<long long>(pkg.executed.size());
  if (std::llabs(n_ref - n_exe) > 1) {
    out.push_back({"count_mismatch", kExecuted, 0,
                   fmt::format("{} executed vs {} reference samples", n_exe, n_ref)});
  }
  for (const auto& [file, n] : {std::pair{kReference, n_ref}, std::pair{kExecuted, n_exe}}) {
    if (std::llabs(n - expect_samples) > slack) {
      out.push_back({"count_mismatch", file, 0,
                     fmt::format("{} samples for {:.3f} s, expected {} +/- {}", n, total_s, expect_samples, slack)});
    }
  }
  if (std::llabs(static_cast<long long>(pkg.commands.size()) - expect_commands) > slack) {
    out.push_back({"count_mismatch", kCommands, 0,
                   fmt::format("{} commands for {:.3f} s, expected {}", pkg.commands.size(), total_s, expect_commands)});
  }

  // Per-segment alignment.
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& t = segs[i].tag;
    long long n = 0;
    for (const auto& s : pkg.reference) {
      if (s.timestamp_ms >= t.start_ms && s.timestamp_ms < t.end_ms) ++n;
    }
    const double d = static_cast<double>(t.end_ms - t.start_ms) / 1000.0;
    const auto expect = std::llround(d * kTelemetryHz);
    if (std::llabs(n - expect) > 1) {
      out.push_back({"segment_alignment", kSegments, i + 1,
                     fmt::format("{} reference samples in segment, expected {} +/- 1", n, expect)});
    }
    if (!near(segs[i].intent.duration_s, d) || segs[i].intent.mode_index != t.mode) {
      out.push_back({"traceability", kSegments, i + 1, "intent mode/duration disagrees with the segment tag"});
    }
    for (const auto& c : commands_in(pkg.commands, t)) {
      if (c.mode_index != t.mode) {
        out.push_back({"traceability", kSegments, i + 1,
                       fmt::format("command at {} ms has mode {}, segment mode {}", c.timestamp_ms, c.mode_index, t.mode)});
        break;
      }
    }
  }

  if (m.recipe.segments.size() != segs.size()) {
    out.push_back({"recipe_mismatch", kManifest, 0,
                   fmt::format("recipe has {} segments, package {}", m.recipe.segments.size(), segs.size())});
  }

  // Annotations.
  const auto& ann = pkg.annotations;
  if (ann.per_segment.size() != segs.size()) {
    out.push_back({"annotation_count", kAnnotations, 0,
                   fmt::format("{} segment annotation rows for {} segments", ann.per_segment.size(), segs.size())});
  }
  if (ann.trajectory.size() != kTrajectoryDescriptionCount) {
    out.push_back({"annotation_count", kAnnotations, 0,
                   fmt::format("{} trajectory descriptions, expected {}", ann.trajectory.size(),
                               kTrajectoryDescriptionCount)});
  }
  if (ann.seed != m.seed) {
    out.push_back({"seed_mismatch", kAnnotations, 0, fmt::format("annotation seed {} vs manifest {}", ann.seed, m.seed)});
  }

  if (registry != nullptr) {
    if (banks != nullptr && m.registry_hash != content_hash(*registry, *banks)) {
      out.push_back({"registry_hash_mismatch", kManifest, 0,
                     fmt::format("package hash {} vs loaded {}", m.registry_hash, content_hash(*registry, *banks))});
    }
    std::vector<SegmentIntent> intents;
    bool modes_ok = true;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& t = segs[i].tag;
      if (t.mode < 0 || static_cast<std::size_t>(t.mode) >= registry->size()) {
        out.push_back({"traceability", kSegments, i + 1, fmt::format("mode {} not in the registry", t.mode)});
        modes_ok = false;
        continue;
      }
      const SegmentIntent derived = derive_intent(*registry, commands_in(pkg.commands, t), t);
      if (!same_intent(derived, segs[i].intent)) {
        out.push_back({"traceability", kSegments, i + 1, "stored intent is not reproducible from the command stream"});
      }
      intents.push_back(segs[i].intent);
    }
    if (banks != nullptr && modes_ok && ann.per_segment.size() == segs.size() &&
        ann.trajectory.size() == kTrajectoryDescriptionCount) {
      const Annotator annotator(*registry, *banks);
      if (annotator.render_trajectory(intents, ann.seed) != ann) {
        out.push_back({"annotation_mismatch", kAnnotations, 0,
                       "annotations differ from a fresh rendering of the segment intents"});
      }
    }
  }
  return out;
}

}  // namespace mocomp
