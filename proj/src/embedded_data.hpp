#pragma once

// Data files compiled into the library (generated from data/ at configure time).
namespace mocomp::embedded {
extern const char* const kRegistryJson;
extern const char* const kBanksJson;
}  // namespace mocomp::embedded
