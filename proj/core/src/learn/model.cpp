#include "gma/learn/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <string>

#include "gma/error.hpp"
#include "gma/random.hpp"

namespace gma {
namespace {

using nlohmann::json;

constexpr std::string_view kCheckpointFormat = "gma-checkpoint";

void check_dataset(std::span<const LabeledTensor> data) {
  if (data.empty()) throw PreconditionError("fit: empty dataset");
  const auto& first = data.front().features;
  for (const auto& example : data) {
    if (example.features.channels() != first.channels() ||
        example.features.length() != first.length()) {
      throw PreconditionError("fit: tensors differ in shape");
    }
  }
}

void put_double(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

double get_double(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw ParseError("checkpoint: truncated parameter block");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::vector<double> forest_parameters(const RandomForest& forest, json& arch) {
  std::vector<double> flat;
  json tree_sizes = json::array();
  json bootstrap_sizes = json::array();
  for (const auto& tree : forest.trees()) {
    tree_sizes.push_back(tree.nodes.size());
    bootstrap_sizes.push_back(tree.bootstrap.size());
    for (const auto& node : tree.nodes) {
      flat.insert(flat.end(), {static_cast<double>(node.feature), node.threshold,
                               static_cast<double>(node.left), static_cast<double>(node.right),
                               node.value});
    }
    for (auto b : tree.bootstrap) flat.push_back(static_cast<double>(b));
  }
  arch["n_trees"] = forest.size();
  arch["dimension"] = forest.dimension();
  arch["tree_sizes"] = std::move(tree_sizes);
  arch["bootstrap_sizes"] = std::move(bootstrap_sizes);
  return flat;
}

RandomForest forest_from_parameters(const json& arch, std::span<const double> flat) {
  std::vector<RandomForest::Tree> trees;
  std::size_t at = 0;
  const auto& sizes = arch.at("tree_sizes");
  const auto& boots = arch.at("bootstrap_sizes");
  if (sizes.size() != boots.size()) throw ParseError("checkpoint: inconsistent forest header");
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    RandomForest::Tree tree;
    const auto n_nodes = sizes[t].get<std::size_t>();
    const auto n_boot = boots[t].get<std::size_t>();
    if (at + 5 * n_nodes + n_boot > flat.size()) throw ParseError("checkpoint: forest block too short");
    for (std::size_t i = 0; i < n_nodes; ++i, at += 5) {
      RandomForest::Node node;
      node.feature = static_cast<std::int32_t>(flat[at]);
      node.threshold = flat[at + 1];
      node.left = static_cast<std::uint32_t>(flat[at + 2]);
      node.right = static_cast<std::uint32_t>(flat[at + 3]);
      node.value = flat[at + 4];
      tree.nodes.push_back(node);
    }
    for (std::size_t i = 0; i < n_boot; ++i) tree.bootstrap.push_back(static_cast<std::uint32_t>(flat[at++]));
    trees.push_back(std::move(tree));
  }
  return RandomForest(arch.at("dimension").get<std::size_t>(), std::move(trees));
}

}  // namespace

Hyperparameters default_hyperparameters(ModelKind kind) {
  Hyperparameters h;
  const auto config = TrainConfig::defaults_for(kind);
  h.learning_rate = config.learning_rate;
  h.batch_size = config.batch_size;
  h.epochs = config.epochs;
  return h;
}

TrainedModel fit_model(ModelKind kind, const Hyperparameters& hyper,
                       std::span<const LabeledTensor> data, std::uint64_t seed) {
  check_dataset(data);
  TrainedModel out;
  out.kind = kind;
  out.channels = data.front().features.channels();
  out.length = data.front().features.length();
  out.seed = seed;
  if (kind == ModelKind::kRandomForest) {
    std::vector<FlatSample> samples;
    samples.reserve(data.size());
    for (const auto& example : data) {
      samples.push_back(flatten(example.features, example.label(), example.info.subject_id));
    }
    ForestOptions options;
    options.n_trees = hyper.n_trees;
    options.seed = seed;
    out.model = RandomForest::fit(samples, options);
    return out;
  }

  TrainConfig config;
  config.kind = kind;
  config.learning_rate = hyper.learning_rate;
  config.batch_size = hyper.batch_size;
  config.epochs = hyper.epochs;
  config.seed = seed;
  config.validate();
  const auto init_seed = derive_seed(seed, 0x1417);
  if (kind == ModelKind::kCnn) {
    Cnn1d net(CnnShape{out.channels}, init_seed);
    out.loss_curve = train(net, data, config).loss_curve;
    out.model = std::move(net);
  } else {
    Lstm net(LstmShape{out.channels}, init_seed);
    out.loss_curve = train(net, data, config).loss_curve;
    out.model = std::move(net);
  }
  return out;
}

double predict(const TrainedModel& model, const FeatureTensor& input) {
  if (input.channels() != model.channels) {
    throw PreconditionError("predict: expected " + std::to_string(model.channels) +
                            " channels, got " + std::to_string(input.channels()));
  }
  if (const auto* forest = std::get_if<RandomForest>(&model.model)) {
    if (input.length() != model.length) {
      throw PreconditionError("predict: random forest expects length " +
                              std::to_string(model.length) + ", got " +
                              std::to_string(input.length()));
    }
    return forest->predict_proba(input.values());
  }
  return std::visit(
      [&](const auto& m) -> double {
        if constexpr (std::is_base_of_v<NeuralNet, std::decay_t<decltype(m)>>) {
          return m.predict(input);
        } else {
          return 0.0;
        }
      },
      model.model);
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  json header;
  header["format"] = kCheckpointFormat;
  header["version"] = 1;
  header["kind"] = to_string(model.kind);
  header["channels"] = model.channels;
  header["length"] = model.length;
  header["seed"] = model.seed;
  header["loss_curve"] = model.loss_curve;
  json arch;
  std::vector<double> flat;
  if (const auto* forest = std::get_if<RandomForest>(&model.model)) {
    flat = forest_parameters(*forest, arch);
  } else if (const auto* cnn = std::get_if<Cnn1d>(&model.model)) {
    arch["input_channels"] = cnn->shape().input_channels;
    arch["conv_channels"] = cnn->shape().conv_channels;
    arch["kernel"] = cnn->shape().kernel;
    arch["bottleneck"] = cnn->shape().bottleneck;
    flat.assign(cnn->parameters().begin(), cnn->parameters().end());
  } else {
    const auto& lstm = std::get<Lstm>(model.model);
    arch["input_channels"] = lstm.shape().input_channels;
    arch["hidden"] = lstm.shape().hidden;
    arch["layers"] = lstm.shape().layers;
    flat.assign(lstm.parameters().begin(), lstm.parameters().end());
  }
  header["architecture"] = std::move(arch);
  header["param_count"] = flat.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << header.dump() << '\n';
  for (double v : flat) put_double(out, v);
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing checkpoint header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
  try {
    if (header.at("format").get<std::string>() != kCheckpointFormat) {
      throw ParseError(path.string() + ": not a gma checkpoint");
    }
    TrainedModel model;
    model.kind = parse_model_kind(header.at("kind").get<std::string>());
    model.channels = header.at("channels").get<std::size_t>();
    model.length = header.at("length").get<std::size_t>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.loss_curve = header.at("loss_curve").get<std::vector<double>>();
    const auto count = header.at("param_count").get<std::size_t>();
    std::vector<double> flat(count);
    for (auto& v : flat) v = get_double(in);
    const auto& arch = header.at("architecture");
    switch (model.kind) {
      case ModelKind::kRandomForest:
        model.model = forest_from_parameters(arch, flat);
        break;
      case ModelKind::kCnn: {
        CnnShape shape{arch.at("input_channels").get<std::size_t>(),
                       arch.at("conv_channels").get<std::vector<std::size_t>>(),
                       arch.at("kernel").get<std::size_t>(), arch.at("bottleneck").get<std::size_t>()};
        Cnn1d net(shape, 0);
        if (net.parameters().size() != count) throw ParseError("checkpoint: parameter count mismatch");
        std::copy(flat.begin(), flat.end(), net.parameters().begin());
        model.model = std::move(net);
        break;
      }
      case ModelKind::kLstm: {
        LstmShape shape{arch.at("input_channels").get<std::size_t>(),
                        arch.at("hidden").get<std::size_t>(), arch.at("layers").get<std::size_t>()};
        Lstm net(shape, 0);
        if (net.parameters().size() != count) throw ParseError("checkpoint: parameter count mismatch");
        std::copy(flat.begin(), flat.end(), net.parameters().begin());
        model.model = std::move(net);
        break;
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace gma
