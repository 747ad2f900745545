#include "glclef/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace glclef {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "glclef-checkpoint/1";

json tensor_json(const Tensor& t) {
  return json{{"shape", {t.rows(), t.cols()}},
              {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from(const json& j, const std::string& name, std::size_t rows, std::size_t cols) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2 || shape[0] != rows || shape[1] != cols) {
    throw CheckpointError("parameter " + name + " has shape inconsistent with model dims");
  }
  return Tensor(rows, cols, j.at("values").get<std::vector<double>>());
}

}  // namespace

std::string checkpoint_to_json(const Model& model) {
  const ModelDims& d = model.params.dims;
  json params = json::object();
  model.params.for_each([&](const std::string& name, const Tensor& t) { params[name] = tensor_json(t); });
  json j{{"format", kFormat},
         {"dims",
          {{"vocab_size", d.vocab_size},
           {"embed_dim", d.embed_dim},
           {"hidden_dim", d.hidden_dim},
           {"num_intents", d.num_intents},
           {"num_slots", d.num_slots}}},
         {"vocab", model.vocab.words()},
         {"intents", model.labels.intents()},
         {"slots", model.labels.slots()},
         {"params", std::move(params)}};
  return j.dump();
}

Model checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != kFormat) throw CheckpointError("unsupported checkpoint format");
    Model m;
    ModelDims& d = m.params.dims;
    const json& jd = j.at("dims");
    d.vocab_size = jd.at("vocab_size");
    d.embed_dim = jd.at("embed_dim");
    d.hidden_dim = jd.at("hidden_dim");
    d.num_intents = jd.at("num_intents");
    d.num_slots = jd.at("num_slots");
    m.vocab = Vocab::from_words(j.at("vocab").get<std::vector<std::string>>());
    m.labels = LabelSets(j.at("intents").get<std::vector<std::string>>(), j.at("slots").get<std::vector<std::string>>());
    if (m.vocab.size() != d.vocab_size) throw CheckpointError("vocabulary size does not match dims.vocab_size");
    if (m.labels.num_intents() != d.num_intents) throw CheckpointError("intent labels do not match dims.num_intents");
    if (m.labels.num_slots() != d.num_slots) throw CheckpointError("slot labels do not match dims.num_slots");

    const std::size_t e = d.embed_dim, h = d.hidden_dim;
    const json& p = j.at("params");
    m.params.embedding = tensor_from(p.at("embedding"), "embedding", d.vocab_size, e);
    for (auto [prefix, lstm] : {std::pair{"forward", &m.params.forward}, std::pair{"backward", &m.params.backward}}) {
      const std::string pre = prefix;
      lstm->w_input = tensor_from(p.at(pre + ".w_input"), pre + ".w_input", 4 * h, e);
      lstm->w_hidden = tensor_from(p.at(pre + ".w_hidden"), pre + ".w_hidden", 4 * h, h);
      lstm->bias = tensor_from(p.at(pre + ".bias"), pre + ".bias", 1, 4 * h);
    }
    m.params.intent_w = tensor_from(p.at("intent_w"), "intent_w", d.num_intents, 2 * h);
    m.params.intent_b = tensor_from(p.at("intent_b"), "intent_b", 1, d.num_intents);
    m.params.slot_w = tensor_from(p.at("slot_w"), "slot_w", d.num_slots, 2 * h);
    m.params.slot_b = tensor_from(p.at("slot_b"), "slot_b", 1, d.num_slots);
    if (!m.params.all_finite()) throw CheckpointError("checkpoint holds non-finite parameters");
    return m;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ParseError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(model) << '\n';
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace glclef
