#include "eyetrans/checkpoint.hpp"

#include <cstring>

#include "eyetrans/augment.hpp"
#include "eyetrans/io.hpp"

namespace eyetrans {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'E', 'Y', 'T', 'R'};

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view b) : bytes_(b) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, c.version);
  put<std::uint64_t>(out, c.config_hash);
  put<std::uint64_t>(out, c.seed);
  put<std::uint32_t>(out, c.epoch);
  put_string(out, c.metadata.dump());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) throw ShapeMismatch("checkpoint tensor " + t.name + ": dims do not match data");
    put_string(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    for (float f : t.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put<std::uint32_t>(out, bits);
    }
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(c.version));
  c.config_hash = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  c.epoch = r.get<std::uint32_t>();
  const auto meta_len = r.get<std::uint32_t>();
  try {
    c.metadata = json::parse(r.take(meta_len));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor t;
    t.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.get<std::uint64_t>());
      count *= t.dims.back();
    }
    if (count > bytes.size()) throw FormatError("checkpoint truncated");
    t.data.resize(count);
    for (auto& f : t.data) {
      const auto bits = r.get<std::uint32_t>();
      std::memcpy(&f, &bits, 4);
    }
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, serialize_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingDataset("missing checkpoint " + path.string());
  return parse_checkpoint(read_file(path));
}

namespace {

NamedTensor named(const std::string& name, const nn::Tensor<float>& t) {
  return {name, {t.rows(), t.cols()}, t.data};
}

NamedTensor named(const std::string& name, std::size_t rows, std::size_t cols, const std::vector<float>& d) {
  return {name, {rows, cols}, d};
}

void copy_into(const Checkpoint& c, const std::string& name, std::size_t rows, std::size_t cols,
               std::vector<float>& dst) {
  const NamedTensor* t = c.find(name);
  if (!t) throw FormatError("checkpoint lacks tensor " + name);
  if (t->dims != std::vector<std::uint64_t>{rows, cols}) {
    throw ShapeMismatch("checkpoint tensor " + name + " has the wrong shape");
  }
  dst = t->data;
}

}  // namespace

Checkpoint make_checkpoint(TaskModel& model, const TrainState& state, std::uint64_t seed, json metadata) {
  Checkpoint c;
  c.seed = seed;
  c.epoch = static_cast<std::uint32_t>(state.epoch);
  metadata["task"] = task_name(model.task());
  metadata["model"] = model_config_to_json(model.config());
  {
    // Training progress does not change what the run is.
    json identity = metadata;
    identity.erase("history");
    c.config_hash = stable_hash(identity.dump());
  }
  metadata["adam_step"] = state.adam.step;
  c.metadata = std::move(metadata);
  auto params = model.parameters();
  for (auto* p : params) c.tensors.push_back(named(p->name, p->value));
  if (!state.adam.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& v = params[i]->value;
      c.tensors.push_back(named("adam.m/" + params[i]->name, v.rows(), v.cols(), state.adam.m[i]));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& v = params[i]->value;
      c.tensors.push_back(named("adam.v/" + params[i]->name, v.rows(), v.cols(), state.adam.v[i]));
    }
  }
  return c;
}

void restore_checkpoint(const Checkpoint& c, TaskModel& model, TrainState& state) {
  auto params = model.parameters();
  for (auto* p : params) copy_into(c, p->name, p->value.rows(), p->value.cols(), p->value.data);
  state = {};
  state.epoch = static_cast<int>(c.epoch);
  state.adam.step = c.metadata.value("adam_step", std::int64_t{0});
  if (state.adam.step > 0) {
    state.adam.m.resize(params.size());
    state.adam.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& v = params[i]->value;
      copy_into(c, "adam.m/" + params[i]->name, v.rows(), v.cols(), state.adam.m[i]);
      copy_into(c, "adam.v/" + params[i]->name, v.rows(), v.cols(), state.adam.v[i]);
    }
  }
}

LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel out;
  out.checkpoint = load_checkpoint(path);
  const json& meta = out.checkpoint.metadata;
  if (!meta.contains("task") || !meta.contains("model")) throw FormatError("checkpoint metadata lacks task/model");
  const TaskKind task = task_from_name(meta["task"].get<std::string>());
  const ModelConfig config = model_config_from_json(meta["model"]);
  out.model = std::make_unique<TaskModel>(task, config);
  restore_checkpoint(out.checkpoint, *out.model, out.state);
  return out;
}

}  // namespace eyetrans
