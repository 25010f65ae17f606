#pragma once

// Disk cache for eigenbases, 1D spectra and overlap matrices.
//
// Layout: <root>/<kind>/<key>.bin plus <key>.meta.txt holding the descriptor.
// File: "QECHOLB1", u32 format version, u64 payload length, payload,
// u64 FNV-1a checksum of the payload. All integers and doubles little-endian.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qecho/billiard.hpp"
#include "qecho/trap1d.hpp"
#include "json.hpp"

namespace qecho::store {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Entry {
  std::string kind;
  // Canonical descriptor text the key was derived from.
  std::string descriptor;
  std::map<std::string, std::vector<double>> arrays;
  std::map<std::string, std::string> labels;

  friend bool operator==(const Entry&, const Entry&) = default;
};

// Canonical text of a descriptor: keys sorted, numbers as exact shortest
// decimal strings, no whitespace.
std::string canonical(const nlohmann::json& descriptor);
// 16 hex digits of FNV-1a 64 over the canonical text.
std::string key_of(const std::string& canonical_text);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::vector<char> encode(const Entry& entry);
// Throws corrupt-entry or version-mismatch.
Entry decode(const std::vector<char>& bytes);

class Cache {
 public:
  explicit Cache(std::filesystem::path root);

  // Writes atomically (temporary file then rename) and returns the key.
  std::string put(const Entry& entry) const;
  std::optional<Entry> get(const std::string& kind, const std::string& key) const;
  std::optional<Entry> get(const std::string& kind, const nlohmann::json& descriptor) const;
  std::filesystem::path path_of(const std::string& kind, const std::string& key) const;

 private:
  std::filesystem::path root_;
};

nlohmann::json describe(const geometry::BilliardShape& shape);
geometry::BilliardShape shape_from(const nlohmann::json& j);

Entry to_entry(const billiard::EigenBasis& basis, const nlohmann::json& descriptor);
billiard::EigenBasis eigenbasis_from(const Entry& entry);

Entry to_entry(const trap1d::Spectrum1D& spectrum, const nlohmann::json& descriptor);
trap1d::Spectrum1D spectrum_from(const Entry& entry);

Entry to_entry(const billiard::OverlapMatrix& m, const nlohmann::json& descriptor);
billiard::OverlapMatrix overlap_from(const Entry& entry);

}  // namespace qecho::store
