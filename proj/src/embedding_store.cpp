// SPDX-License-Identifier: Apache-2.0
#include "rsaprobe/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "binary_io.hpp"
#include "rsaprobe/errors.hpp"

namespace rsaprobe {
namespace {

constexpr std::string_view kMagic = "RSAE1";

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                const char* kind) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ValidationError("unknown " + std::string(kind) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Modality>, 3> kModalities{{
    {"unimodal-pl", Modality::kUnimodalPl},
    {"bimodal-nl-pl", Modality::kBimodalNlPl},
    {"nl-only", Modality::kNlOnly},
}};
constexpr std::array<std::pair<std::string_view, Language>, 7> kLanguages{{
    {"go", Language::kGo},
    {"java", Language::kJava},
    {"javascript", Language::kJavascript},
    {"php", Language::kPhp},
    {"python", Language::kPython},
    {"ruby", Language::kRuby},
    {"none", Language::kNone},
}};
constexpr std::array<std::pair<std::string_view, Correctness>, 3> kCorrectness{{
    {"correct", Correctness::kCorrect},
    {"incorrect", Correctness::kIncorrect},
    {"n/a", Correctness::kNotApplicable},
}};
constexpr std::array<std::pair<std::string_view, Pooling>, 2> kPoolings{{
    {"first-token", Pooling::kFirstToken},
    {"mean", Pooling::kMean},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

void check_ids(const std::vector<std::string>& ids) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids) {
    if (id.empty()) throw ValidationError("empty sample id");
    if (id.find('\n') != std::string::npos) {
      throw ValidationError("sample id contains a newline: '" + id + "'");
    }
    if (!seen.insert(id).second) throw ValidationError("duplicate sample id '" + id + "'");
  }
}

EmbeddingMeta meta_for(const std::filesystem::path& payload, int model_depth) {
  const auto side = sidecar_path(payload);
  if (!std::filesystem::exists(side)) return {};
  auto meta = decode_meta_json(detail::slurp(side.string()));
  validate(meta, model_depth);
  return meta;
}

}  // namespace

std::string_view to_string(Modality m) { return name_of(m, kModalities); }
std::string_view to_string(Language l) { return name_of(l, kLanguages); }
std::string_view to_string(Correctness c) { return name_of(c, kCorrectness); }
std::string_view to_string(Pooling p) { return name_of(p, kPoolings); }

Modality parse_modality(std::string_view s) { return parse_enum(s, kModalities, "modality"); }
Language parse_language(std::string_view s) { return parse_enum(s, kLanguages, "language"); }
Correctness parse_correctness(std::string_view s) {
  return parse_enum(s, kCorrectness, "correctness");
}
Pooling parse_pooling(std::string_view s) { return parse_enum(s, kPoolings, "pooling"); }

Checkpoint Checkpoint::parse(std::string_view label) {
  int k = -1;
  if (label.size() >= 2 && label[0] == 'x') {
    const auto* first = label.data() + 1;
    const auto* last = label.data() + label.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    // Reject leading zeros ("x08") and trailing junk.
    if (ec != std::errc{} || ptr != last || (label.size() > 2 && label[1] == '0')) k = -1;
  }
  if (k != 0 && k != 1 && k != 2 && k != 4 && k != 8 && k != 16 && k != 32) {
    throw ValidationError("invalid checkpoint label '" + std::string(label) +
                          "' (expected x0|x1|x2|x4|x8|x16|x32)");
  }
  return Checkpoint(k);
}

Checkpoint Checkpoint::from_multiplier(int k) { return parse("x" + std::to_string(k)); }

void validate(const EmbeddingMeta& meta, int model_depth) {
  if (meta.layer < 0 || meta.layer > model_depth) {
    throw ValidationError("layer " + std::to_string(meta.layer) + " outside [0, " +
                          std::to_string(model_depth) + "]");
  }
  Checkpoint::parse(meta.checkpoint);
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> sample_ids, std::size_t dim,
                           std::vector<float> values, EmbeddingMeta meta)
    : ids_(std::move(sample_ids)), dim_(dim), values_(std::move(values)), meta_(std::move(meta)) {
  if (dim_ == 0) throw ValidationError("embedding dimension must be >= 1");
  if (values_.size() != ids_.size() * dim_) {
    throw ValidationError("matrix has " + std::to_string(values_.size()) + " values, expected " +
                          std::to_string(ids_.size()) + " x " + std::to_string(dim_));
  }
  check_ids(ids_);
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw ValidationError("non-finite value in row '" + ids_[k / dim_] + "' column " +
                            std::to_string(k % dim_));
    }
  }
}

EmbeddingSet EmbeddingSet::select(std::span<const std::string> ids) const {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) index.emplace(ids_[i], i);

  std::vector<float> out;
  out.reserve(ids.size() * dim_);
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw AlignmentError("sample id '" + id + "' not present in set");
    auto r = row(it->second);
    out.insert(out.end(), r.begin(), r.end());
  }
  return EmbeddingSet(std::vector<std::string>(ids.begin(), ids.end()), dim_, std::move(out),
                      meta_);
}

std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
  auto side = payload;
  side.replace_extension(".meta.json");
  return side;
}

std::string encode_meta_json(const EmbeddingMeta& meta) {
  nlohmann::ordered_json j;
  j["model_id"] = meta.model_id;
  j["layer"] = meta.layer;
  j["modality"] = to_string(meta.modality);
  j["language"] = to_string(meta.language);
  j["checkpoint"] = meta.checkpoint;
  j["correctness"] = to_string(meta.correctness);
  j["pooling"] = to_string(meta.pooling);
  return j.dump(2) + "\n";
}

EmbeddingMeta decode_meta_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("metadata sidecar is not valid JSON: ") + e.what(), e.byte);
  }
  EmbeddingMeta meta;
  try {
    meta.model_id = j.at("model_id").get<std::string>();
    meta.layer = j.at("layer").get<int>();
    meta.modality = parse_modality(j.at("modality").get<std::string>());
    meta.language = parse_language(j.at("language").get<std::string>());
    meta.checkpoint = j.at("checkpoint").get<std::string>();
    meta.correctness = parse_correctness(j.at("correctness").get<std::string>());
    meta.pooling = parse_pooling(j.at("pooling").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("metadata sidecar: ") + e.what());
  }
  return meta;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  if (set.size() == 0) throw ValidationError("refusing to write an empty embedding set");
  validate(set.meta());

  std::string out;
  out.reserve(kMagic.size() + 8 + set.values().size() * 4 + set.size() * 16);
  out.append(kMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(set.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(set.dim()));
  detail::put_f32s(out, set.values());
  detail::put_id_block(out, set.sample_ids());

  detail::spit(path.string(), out);
  detail::spit(sidecar_path(path).string(), encode_meta_json(set.meta()));
}

namespace {

struct Header {
  std::uint32_t n;
  std::uint32_t d;
};

Header read_header(detail::Reader& in) {
  auto magic = in.take(kMagic.size(), "magic");
  if (magic != kMagic) throw FormatError("bad magic, not an RSAE1 file", 0);
  Header h{in.u32("row count"), in.u32("dimension")};
  if (h.d == 0) throw FormatError("dimension must be >= 1", 9);
  const std::uint64_t matrix_bytes = std::uint64_t{h.n} * h.d * 4;
  if (in.remaining() < matrix_bytes) {
    throw FormatError("dimension mismatch: header declares " + std::to_string(h.n) + " x " +
                          std::to_string(h.d) + " but only " + std::to_string(in.remaining()) +
                          " payload bytes follow",
                      in.offset());
  }
  return h;
}

}  // namespace

EmbeddingSet read_embeddings(const std::filesystem::path& path, int model_depth) {
  const std::string bytes = detail::slurp(path.string());
  detail::Reader in(bytes);
  const Header h = read_header(in);
  const std::uint64_t values_at = in.offset();
  auto values = in.f32s(std::uint64_t{h.n} * h.d, "matrix values");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) throw FormatError("non-finite matrix value", values_at + 4 * k);
  }
  auto ids = detail::read_id_block(in, h.n);
  if (in.remaining() != 0) throw FormatError("trailing bytes after id block", in.offset());
  return EmbeddingSet(std::move(ids), h.d, std::move(values), meta_for(path, model_depth));
}

std::vector<std::string> read_embedding_ids(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::string head(13, '\0');
  f.read(head.data(), 13);
  head.resize(static_cast<std::size_t>(f.gcount()));
  detail::Reader hin(head);
  auto magic = hin.take(kMagic.size(), "magic");
  if (magic != kMagic) throw FormatError("bad magic, not an RSAE1 file", 0);
  const std::uint32_t n = hin.u32("row count");
  const std::uint32_t d = hin.u32("dimension");
  const std::uint64_t skip = 13 + std::uint64_t{n} * d * 4;
  f.seekg(static_cast<std::streamoff>(skip));
  std::string tail((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (!f.eof() && f.fail()) throw FormatError("truncated file: expected id block", skip);
  detail::Reader tin(tail);
  try {
    return detail::read_id_block(tin, n);
  } catch (const FormatError& e) {
    throw FormatError("id block unreadable", skip + tin.offset());
  }
}

EmbeddingSet read_embeddings_tsv(const std::filesystem::path& path, int model_depth) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(f, line)) throw FormatError("empty TSV file", 0);

  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = s.find('\t', start);
      fields.push_back(s.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return fields;
  };

  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  if (header.size() < 2 || header[0] != "id") {
    throw FormatError("TSV header must be id\\tv0\\t...", 0);
  }
  const std::size_t d = header.size() - 1;
  for (std::size_t c = 0; c < d; ++c) {
    if (header[c + 1] != "v" + std::to_string(c)) {
      throw FormatError("TSV header column " + std::to_string(c + 1) + " must be v" +
                            std::to_string(c),
                        0);
    }
  }
  offset += line.size() + 1;

  std::vector<std::string> ids;
  std::vector<float> values;
  while (std::getline(f, line)) {
    const std::uint64_t line_at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != d + 1) {
      throw FormatError("dimension mismatch: row '" + fields[0] + "' has " +
                            std::to_string(fields.size() - 1) + " values, expected " +
                            std::to_string(d),
                        line_at);
    }
    ids.push_back(std::move(fields[0]));
    for (std::size_t c = 1; c <= d; ++c) {
      const auto& s = fields[c];
      float v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("unparseable value '" + s + "'", line_at);
      }
      values.push_back(v);
    }
  }
  return EmbeddingSet(std::move(ids), d, std::move(values), meta_for(path, model_depth));
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, int model_depth) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::string head(kMagic.size(), '\0');
  f.read(head.data(), static_cast<std::streamsize>(head.size()));
  f.close();
  if (head == kMagic) return read_embeddings(path, model_depth);
  if (head.rfind("id\t", 0) == 0) return read_embeddings_tsv(path, model_depth);
  throw FormatError("neither RSAE1 magic nor a TSV header", 0);
}

std::pair<EmbeddingSet, EmbeddingSet> align_sets(const EmbeddingSet& a, const EmbeddingSet& b) {
  std::vector<std::string> sa = a.sample_ids();
  std::vector<std::string> sb = b.sample_ids();
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::string> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  if (common.size() < 2) {
    throw AlignmentError("cannot align sets: " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " ids share only " +
                         std::to_string(common.size()) + " (need >= 2)");
  }
  return {a.select(common), b.select(common)};
}

namespace detail {

void put_id_block(std::string& out, std::span<const std::string> ids) {
  std::string block;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) block.push_back('\n');
    block += ids[i];
  }
  put_u32(out, static_cast<std::uint32_t>(block.size()));
  out += block;
}

std::vector<std::string> read_id_block(Reader& in, std::uint64_t expected) {
  const std::uint64_t len_at = in.offset();
  const std::uint32_t len = in.u32("id block length");
  auto block = in.take(len, "id block");
  std::vector<std::string> ids;
  if (expected == 0) {
    if (len != 0) throw FormatError("id block present for zero rows", len_at);
    return ids;
  }
  std::size_t start = 0;
  while (true) {
    auto nl = block.find('\n', start);
    ids.emplace_back(block.substr(start, nl == std::string_view::npos ? nl : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  if (ids.size() != expected) {
    throw FormatError("id block holds " + std::to_string(ids.size()) + " ids, header declares " +
                          std::to_string(expected),
                      len_at);
  }
  return ids;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return std::move(ss).str();
}

void spit(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed for '" + path + "'");
}

}  // namespace detail
}  // namespace rsaprobe
