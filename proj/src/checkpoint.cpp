#include "protofair/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "protofair/common.hpp"
#include "protofair/json_util.hpp"

namespace protofair {

namespace {

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

void read_matrix(std::ifstream& in, Eigen::MatrixXd& m, int rows, int cols,
                 const std::string& path) {
  m.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double v;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw DataError("truncated checkpoint: " + path);
      m(r, c) = v;
    }
}

}  // namespace

void save_checkpoint(const PrototypeModel& model, const TrainConfig& config,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);

  nlohmann::json meta{
      {"model_kind", model.kind == ModelKind::kMatrixFactorization ? "mf" : "protomf"},
      {"n_users", model.num_users()},
      {"n_items", model.num_items()},
      {"embedding_dim", model.dim()},
      {"n_user_prototypes", model.n_user_protos()},
      {"n_item_prototypes", model.n_item_protos()},
      {"k_user", model.k_user},
      {"k_item", model.k_item},
      {"train_config", train_config_to_json(config)}};
  std::string header = meta.dump();

  out << kCheckpointMagic << '\n';
  std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  write_matrix(out, model.users);
  write_matrix(out, model.items);
  if (model.kind == ModelKind::kProtoMF) {
    write_matrix(out, model.user_protos);
    write_matrix(out, model.item_protos);
    write_matrix(out, model.user_to_item_space);
    write_matrix(out, model.item_to_user_space);
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw DataError("not a checkpoint (bad magic): " + path);

  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)))
    throw DataError("truncated checkpoint header: " + path);
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len)))
    throw DataError("truncated checkpoint header: " + path);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint header: " + std::string(e.what()));
  }

  PrototypeModel model;
  std::string kind = meta.at("model_kind").get<std::string>();
  model.kind = kind == "mf" ? ModelKind::kMatrixFactorization : ModelKind::kProtoMF;
  int n_users = meta.at("n_users").get<int>();
  int n_items = meta.at("n_items").get<int>();
  int dim = meta.at("embedding_dim").get<int>();
  int l_user = meta.at("n_user_prototypes").get<int>();
  int l_item = meta.at("n_item_prototypes").get<int>();
  model.k_user = meta.at("k_user").get<int>();
  model.k_item = meta.at("k_item").get<int>();

  read_matrix(in, model.users, n_users, dim, path);
  read_matrix(in, model.items, n_items, dim, path);
  if (model.kind == ModelKind::kProtoMF) {
    read_matrix(in, model.user_protos, l_user, dim, path);
    read_matrix(in, model.item_protos, l_item, dim, path);
    read_matrix(in, model.user_to_item_space, l_item, dim, path);
    read_matrix(in, model.item_to_user_space, l_user, dim, path);
  }

  TrainConfig config = train_config_from_json(meta.at("train_config"));
  return LoadedCheckpoint{std::move(model), std::move(config)};
}

}  // namespace protofair
