#include "qecho/store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "qecho/error.hpp"

namespace qecho::store {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string canonical(const json& descriptor) { return descriptor.dump(); }

std::string key_of(const std::string& canonical_text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_text.data(), canonical_text.size())));
  return buf;
}

namespace {

constexpr char kMagic[8] = {'Q', 'E', 'C', 'H', 'O', 'L', 'B', '1'};

class Writer {
 public:
  void u64(std::uint64_t v) { raw(&v, 8); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    out.insert(out.end(), c, c + n);
  }
  std::vector<char> out;
};

class Reader {
 public:
  Reader(const char* p, std::size_t n) : p_(p), n_(n) {}
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(p_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::uint64_t n = u64();
    if (n > (n_ - pos_) / sizeof(double)) corrupt();
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  bool done() const { return pos_ == n_; }

 private:
  [[noreturn]] static void corrupt() { fail(ErrorKind::CorruptEntry, "cache entry: payload ends early"); }
  void need(std::uint64_t n) const {
    if (n > n_ - pos_) corrupt();
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, p_ + pos_, n);
    pos_ += n;
  }
  const char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> encode(const Entry& entry) {
  Writer payload;
  payload.str(entry.kind);
  payload.str(entry.descriptor);
  payload.u64(entry.labels.size());
  for (const auto& [k, v] : entry.labels) {
    payload.str(k);
    payload.str(v);
  }
  payload.u64(entry.arrays.size());
  for (const auto& [k, v] : entry.arrays) {
    payload.str(k);
    payload.doubles(v);
  }
  Writer file;
  file.raw(kMagic, 8);
  file.u32(kFormatVersion);
  file.u64(payload.out.size());
  file.raw(payload.out.data(), payload.out.size());
  file.u64(fnv1a(payload.out.data(), payload.out.size()));
  return file.out;
}

Entry decode(const std::vector<char>& bytes) {
  if (bytes.size() < 8 + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    fail(ErrorKind::CorruptEntry, "cache entry: bad magic or truncated header");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 8, 4);
  if (version != kFormatVersion) {
    fail(ErrorKind::VersionMismatch, "cache entry: format version " + std::to_string(version) + ", expected " +
                                         std::to_string(kFormatVersion));
  }
  std::uint64_t length;
  std::memcpy(&length, bytes.data() + 12, 8);
  if (length != bytes.size() - 28) fail(ErrorKind::CorruptEntry, "cache entry: length does not match file size");
  const char* payload = bytes.data() + 20;
  std::uint64_t stored;
  std::memcpy(&stored, payload + length, 8);
  if (stored != fnv1a(payload, length)) fail(ErrorKind::CorruptEntry, "cache entry: checksum mismatch");

  Reader r(payload, length);
  Entry e;
  e.kind = r.str();
  e.descriptor = r.str();
  const std::uint64_t nl = r.u64();
  for (std::uint64_t i = 0; i < nl; ++i) {
    std::string k = r.str();
    e.labels[k] = r.str();
  }
  const std::uint64_t na = r.u64();
  for (std::uint64_t i = 0; i < na; ++i) {
    std::string k = r.str();
    e.arrays[k] = r.doubles();
  }
  if (!r.done()) fail(ErrorKind::CorruptEntry, "cache entry: trailing bytes in payload");
  return e;
}

Cache::Cache(fs::path root) : root_(std::move(root)) {}

fs::path Cache::path_of(const std::string& kind, const std::string& key) const {
  return root_ / kind / (key + ".bin");
}

namespace {

void write_atomic(const fs::path& target, const char* data, std::size_t size) {
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) fail(ErrorKind::IoFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot publish " + target.string() + ": " + ec.message());
}

}  // namespace

std::string Cache::put(const Entry& entry) const {
  require(!entry.kind.empty(), "cache: entry kind is empty");
  const std::string key = key_of(entry.descriptor);
  std::error_code ec;
  fs::create_directories(root_ / entry.kind, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create cache directory: " + ec.message());
  const std::vector<char> bytes = encode(entry);
  write_atomic(path_of(entry.kind, key), bytes.data(), bytes.size());
  const std::string meta = entry.descriptor + "\n";
  write_atomic(root_ / entry.kind / (key + ".meta.txt"), meta.data(), meta.size());
  return key;
}

std::optional<Entry> Cache::get(const std::string& kind, const std::string& key) const {
  const fs::path p = path_of(kind, key);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::IoFailure, "cannot read " + p.string());
  Entry e = decode(bytes);
  if (e.kind != kind) fail(ErrorKind::CorruptEntry, "cache entry " + p.string() + " has kind " + e.kind);
  return e;
}

std::optional<Entry> Cache::get(const std::string& kind, const json& descriptor) const {
  const std::string text = canonical(descriptor);
  std::optional<Entry> e = get(kind, key_of(text));
  // A different descriptor hashing to the same key is a miss, not a hit.
  if (e && e->descriptor != text) return std::nullopt;
  return e;
}

json describe(const geometry::BilliardShape& shape) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, geometry::Stadium>) return {{"type", "stadium"}, {"r", p.r}, {"l", p.l}};
        if constexpr (std::is_same_v<T, geometry::Rectangle>) return {{"type", "rectangle"}, {"a", p.a}, {"b", p.b}};
        if constexpr (std::is_same_v<T, geometry::Circle>) return {{"type", "circle"}, {"R", p.R}};
      },
      shape.params());
}

geometry::BilliardShape shape_from(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "stadium") return geometry::BilliardShape::stadium(j.at("r").get<double>(), j.at("l").get<double>());
  if (type == "rectangle") return geometry::BilliardShape::rectangle(j.at("a").get<double>(), j.at("b").get<double>());
  if (type == "circle") return geometry::BilliardShape::circle(j.at("R").get<double>());
  fail(ErrorKind::InvalidParameter, "unknown shape type '" + type + "'");
}

namespace {

const std::vector<double>& array(const Entry& e, const std::string& name) {
  const auto it = e.arrays.find(name);
  if (it == e.arrays.end()) fail(ErrorKind::CorruptEntry, "cache entry lacks array '" + name + "'");
  return it->second;
}

const std::string& label(const Entry& e, const std::string& name) {
  const auto it = e.labels.find(name);
  if (it == e.labels.end()) fail(ErrorKind::CorruptEntry, "cache entry lacks label '" + name + "'");
  return it->second;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<size_t>(m.size()));
  Eigen::Map<Eigen::MatrixXd>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

Eigen::MatrixXd unflatten(const std::vector<double>& v, double rows, double cols) {
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  if (r < 0 || c < 0 || static_cast<size_t>(r * c) != v.size()) fail(ErrorKind::CorruptEntry, "matrix shape mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), r, c);
}

}  // namespace

Entry to_entry(const billiard::EigenBasis& basis, const json& descriptor) {
  Entry e;
  e.kind = "eigenbasis";
  e.descriptor = canonical(descriptor);
  e.labels["shape"] = describe(basis.shape).dump();
  e.labels["class"] = geometry::to_string(basis.cls);
  e.arrays["window"] = {basis.k_lo, basis.k_hi};
  e.arrays["weyl"] = {basis.weyl_expected, static_cast<double>(basis.weyl_found), basis.weyl_tolerance,
                      basis.complete ? 1.0 : 0.0, static_cast<double>(basis.rejected)};
  std::vector<double> suspects;
  for (const auto& [a, b] : basis.suspect_intervals) {
    suspects.push_back(a);
    suspects.push_back(b);
  }
  e.arrays["suspects"] = suspects;
  auto& k = e.arrays["k"];
  auto& quality = e.arrays["quality"];
  auto& layout = e.arrays["basis_layout"];
  auto& alphas = e.arrays["alphas"];
  auto& coef = e.arrays["coefficients"];
  for (const auto& s : basis.states) {
    k.push_back(s.k);
    quality.push_back(s.quality);
    layout.insert(layout.end(), {static_cast<double>(s.basis.plane_waves), static_cast<double>(s.basis.evanescent_angles),
                                 static_cast<double>(s.basis.evanescent_alphas.size()), s.basis.support_centre.x,
                                 s.basis.support_centre.y, s.basis.support_radius,
                                 static_cast<double>(s.coefficients.size())});
    alphas.insert(alphas.end(), s.basis.evanescent_alphas.begin(), s.basis.evanescent_alphas.end());
    coef.insert(coef.end(), s.coefficients.data(), s.coefficients.data() + s.coefficients.size());
  }
  return e;
}

billiard::EigenBasis eigenbasis_from(const Entry& e) {
  if (e.kind != "eigenbasis") fail(ErrorKind::CorruptEntry, "entry is not an eigenbasis");
  billiard::EigenBasis b;
  b.shape = shape_from(json::parse(label(e, "shape")));
  b.cls = geometry::parse_symmetry(label(e, "class"));
  const auto& window = array(e, "window");
  const auto& weyl = array(e, "weyl");
  if (window.size() != 2 || weyl.size() != 5) fail(ErrorKind::CorruptEntry, "eigenbasis header arrays malformed");
  b.k_lo = window[0];
  b.k_hi = window[1];
  b.weyl_expected = weyl[0];
  b.weyl_found = static_cast<int>(weyl[1]);
  b.weyl_tolerance = weyl[2];
  b.complete = weyl[3] != 0.0;
  b.rejected = static_cast<int>(weyl[4]);
  const auto& suspects = array(e, "suspects");
  for (size_t i = 0; i + 1 < suspects.size(); i += 2) b.suspect_intervals.emplace_back(suspects[i], suspects[i + 1]);

  const auto& k = array(e, "k");
  const auto& quality = array(e, "quality");
  const auto& layout = array(e, "basis_layout");
  const auto& alphas = array(e, "alphas");
  const auto& coef = array(e, "coefficients");
  if (quality.size() != k.size() || layout.size() != 7 * k.size()) fail(ErrorKind::CorruptEntry, "eigenbasis arrays disagree");
  size_t ia = 0;
  size_t ic = 0;
  for (size_t i = 0; i < k.size(); ++i) {
    billiard::EigenState s;
    s.k = k[i];
    s.cls = b.cls;
    s.shape = b.shape;
    s.quality = quality[i];
    const double* l = layout.data() + 7 * i;
    s.basis.plane_waves = static_cast<int>(l[0]);
    s.basis.evanescent_angles = static_cast<int>(l[1]);
    const auto na = static_cast<size_t>(l[2]);
    s.basis.support_centre = {l[3], l[4]};
    s.basis.support_radius = l[5];
    const auto nc = static_cast<size_t>(l[6]);
    if (ia + na > alphas.size() || ic + nc > coef.size()) fail(ErrorKind::CorruptEntry, "eigenbasis arrays too short");
    s.basis.evanescent_alphas.assign(alphas.begin() + static_cast<long>(ia), alphas.begin() + static_cast<long>(ia + na));
    s.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data() + ic, static_cast<Eigen::Index>(nc));
    if (s.basis.size() != static_cast<int>(nc)) fail(ErrorKind::CorruptEntry, "eigenbasis coefficient count mismatch");
    ia += na;
    ic += nc;
    b.states.push_back(std::move(s));
  }
  return b;
}

Entry to_entry(const trap1d::Spectrum1D& s, const json& descriptor) {
  Entry e;
  e.kind = "spectrum1d";
  e.descriptor = canonical(descriptor);
  e.arrays["grid"] = {s.grid.x_min, s.grid.x_max, static_cast<double>(s.grid.n), s.mass};
  e.arrays["potential"] = s.potential;
  e.arrays["energies"] = s.energies;
  e.arrays["states"] = flatten(s.states);
  return e;
}

trap1d::Spectrum1D spectrum_from(const Entry& e) {
  if (e.kind != "spectrum1d") fail(ErrorKind::CorruptEntry, "entry is not a 1D spectrum");
  trap1d::Spectrum1D s;
  const auto& grid = array(e, "grid");
  if (grid.size() != 4) fail(ErrorKind::CorruptEntry, "spectrum grid malformed");
  s.grid = {grid[0], grid[1], static_cast<int>(grid[2])};
  s.mass = grid[3];
  s.potential = array(e, "potential");
  s.energies = array(e, "energies");
  s.states = unflatten(array(e, "states"), grid[2], static_cast<double>(s.energies.size()));
  return s;
}

Entry to_entry(const billiard::OverlapMatrix& m, const json& descriptor) {
  Entry e;
  e.kind = "overlap";
  e.descriptor = canonical(descriptor);
  e.arrays["shape"] = {static_cast<double>(m.entries.rows()), static_cast<double>(m.entries.cols())};
  e.arrays["entries"] = flatten(m.entries);
  e.arrays["k_a"] = m.k_a;
  e.arrays["k_b"] = m.k_b;
  e.arrays["row_sumsq"] = m.row_sumsq;
  e.arrays["col_sumsq"] = m.col_sumsq;
  return e;
}

billiard::OverlapMatrix overlap_from(const Entry& e) {
  if (e.kind != "overlap") fail(ErrorKind::CorruptEntry, "entry is not an overlap matrix");
  billiard::OverlapMatrix m;
  const auto& shape = array(e, "shape");
  if (shape.size() != 2) fail(ErrorKind::CorruptEntry, "overlap shape malformed");
  m.entries = unflatten(array(e, "entries"), shape[0], shape[1]);
  m.k_a = array(e, "k_a");
  m.k_b = array(e, "k_b");
  m.row_sumsq = array(e, "row_sumsq");
  m.col_sumsq = array(e, "col_sumsq");
  return m;
}

}  // namespace qecho::store
