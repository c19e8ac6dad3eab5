#include "core/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semgen {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kVersion = 1;

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_.append(s);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end, std::string source)
      : buf_(buf), end_(end), source_(std::move(source)) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > end_ - pos_) fail("implausible element count");
    return n;
  }
  bool done() const { return pos_ == end_; }
  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError("checkpoint '" + source_ + "': " + why);
  }

 private:
  void need(std::uint64_t n) {
    if (n > end_ - pos_) fail("truncated");
  }
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = sizeof kMagic;
  std::string source_;
};

}  // namespace

const ad::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::optional<std::string> Checkpoint::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  return std::nullopt;
}

RunConfig Checkpoint::config() const { return parse_config(config_text, "<checkpoint>"); }

Checkpoint snapshot(const Model& model, const RunConfig& cfg, const data::Vocabulary& vocab,
                    std::vector<std::pair<std::string, std::string>> metadata) {
  if (vocab.size() != model.vocab_size())
    throw MismatchError("snapshot: vocabulary size does not match the model");
  Checkpoint c;
  c.config_text = config_to_text(cfg);
  c.vocab = vocab;
  c.metadata = std::move(metadata);
  const auto& names = model.params().names();
  const auto& tensors = model.params().tensors();
  for (std::size_t i = 0; i < names.size(); ++i)
    c.tensors.emplace_back(names[i], ad::Tensor(tensors[i]->shape(), tensors[i]->storage()));
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes().append(kMagic, sizeof kMagic);
  w.u64(kVersion);
  w.str(ckpt.config_text);
  w.str(ckpt.vocab.fingerprint());
  w.u64(ckpt.vocab.size() - data::Vocabulary::kNumSpecials);
  for (std::size_t i = data::Vocabulary::kNumSpecials; i < ckpt.vocab.size(); ++i) {
    w.str(ckpt.vocab.token(static_cast<int>(i)));
    w.u64(ckpt.vocab.count(static_cast<int>(i)));
  }
  w.u64(ckpt.metadata.size());
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u64(ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    for (double x : t.data()) w.f64(x);
  }
  w.u64(fnv1a(w.bytes().data(), w.bytes().size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename onto '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 16 || buf.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0)
    throw FormatError("'" + path + "' is not a checkpoint");
  const std::size_t body = buf.size() - 8;
  Reader tail(buf, buf.size(), path);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[body + i])) << (8 * i);
  if (stored != fnv1a(buf.data(), body)) throw FormatError("checkpoint '" + path + "': checksum mismatch");

  Reader r(buf, body, path);
  if (r.u64() != kVersion) r.fail("unsupported version");
  Checkpoint c;
  c.config_text = r.str();
  const std::string fingerprint = r.str();
  data::Tokens tokens;
  std::vector<std::size_t> counts;
  for (std::size_t n = r.count(); n > 0; --n) {
    tokens.push_back(r.str());
    counts.push_back(r.u64());
  }
  c.vocab = data::Vocabulary(tokens, std::move(counts));
  if (c.vocab.fingerprint() != fingerprint) r.fail("vocabulary fingerprint mismatch");
  for (std::size_t n = r.count(); n > 0; --n) {
    std::string k = r.str();
    c.metadata.emplace_back(std::move(k), r.str());
  }
  for (std::size_t n = r.count(); n > 0; --n) {
    std::string name = r.str();
    ad::Shape shape(r.count());
    std::size_t size = 1;
    for (auto& d : shape) {
      d = r.count();
      size *= d;
    }
    std::vector<double> values(size);
    for (auto& x : values) x = r.f64();
    c.tensors.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) r.fail("trailing bytes");
  return c;
}

namespace {

void copy_into(ad::Tensor& dst, const ad::Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape())
    throw ShapeError("parameter '" + name + "' has shape " + ad::shape_str(dst.shape()) +
                     " but the checkpoint holds " + ad::shape_str(src.shape()));
  std::copy(src.data().begin(), src.data().end(), dst.data().begin());
}

}  // namespace

void load_parameters(Model& model, const Checkpoint& ckpt) {
  auto& store = model.params();
  for (std::size_t i = 0; i < store.names().size(); ++i) {
    const std::string& name = store.names()[i];
    const ad::Tensor* src = ckpt.find(name);
    if (!src) throw FormatError("checkpoint lacks parameter '" + name + "'");
    copy_into(*store.tensors()[i], *src, name);
  }
}

std::unique_ptr<Model> restore_model(const Checkpoint& ckpt) {
  const RunConfig cfg = ckpt.config();
  auto model = std::make_unique<Model>(cfg.model, ckpt.vocab.size(), cfg.train.seed);
  load_parameters(*model, ckpt);
  return model;
}

bool is_warm_start_parameter(const std::string& name) {
  return name.rfind("decoder.def.", 0) == 0 || name == "embed.special";
}

std::size_t warm_start(Model& model, const Checkpoint& pretrained) {
  auto& store = model.params();
  std::size_t copied = 0;
  for (std::size_t i = 0; i < store.names().size(); ++i) {
    const std::string& name = store.names()[i];
    if (!is_warm_start_parameter(name)) continue;
    const ad::Tensor* src = pretrained.find(name);
    if (!src) throw FormatError("pretrained checkpoint lacks '" + name + "'");
    copy_into(*store.tensors()[i], *src, name);
    ++copied;
  }
  return copied;
}

}  // namespace semgen
