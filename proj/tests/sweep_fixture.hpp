// SPDX-License-Identifier: Apache-2.0
//
// Writes a small synthetic grid (NL set plus code sets) and a sweep
// config pointing at it.
#pragma once

#include <fstream>
#include <random>
#include <type_traits>
#include <string>
#include <vector>

#include "rsaprobe/embedding_store.hpp"
#include "rsaprobe/pipeline.hpp"

namespace testing {

struct SweepFixture {
  std::vector<int> layers = {1, 2};
  std::vector<std::string> checkpoints = {"x0", "x1"};
  std::vector<std::string> modalities = {"unimodal-pl"};
  std::vector<std::string> correctness = {"correct"};
  std::string language = "go";
  std::size_t conditions = 16;
  std::size_t dim = 8;
  std::uint64_t seed = 1;
  std::string extra_json;  // appended config members, each with a leading comma

  // Writes inputs below root and returns the config path.
  std::filesystem::path write(const std::filesystem::path& root) const {
    using namespace rsaprobe;
    std::mt19937_64 gen(seed);
    std::normal_distribution<float> normal;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < conditions; ++i) ids.push_back("p" + std::to_string(1000 + i));

    std::vector<float> latent(conditions * dim);
    for (auto& x : latent) x = normal(gen);
    EmbeddingMeta nl_meta;
    nl_meta.model_id = "bert-base-uncased";
    nl_meta.modality = Modality::kNlOnly;
    std::filesystem::create_directories(root / "nl");
    write_embeddings(EmbeddingSet(ids, dim, latent, nl_meta), root / "nl" / (language + ".rsae"));

    int variant = 0;
    for (int layer : layers) {
      for (const auto& cp : checkpoints) {
        for (const auto& mod : modalities) {
          for (const auto& corr : correctness) {
            // Noise shrinks with depth so scores vary across the grid.
            const float sigma = 0.3f * static_cast<float>(1 + variant++ % 5) / static_cast<float>(layer);
            std::vector<float> v(latent);
            for (auto& x : v) x += sigma * normal(gen);
            EmbeddingMeta m;
            m.model_id = "microsoft/codebert-base";
            m.layer = layer;
            m.modality = parse_modality(mod);
            m.language = parse_language(language);
            m.checkpoint = cp;
            m.correctness = parse_correctness(corr);
            SweepConfig probe;
            probe.embedding_root = root / "code";
            const auto path = probe.code_path(m.language, layer, Checkpoint::parse(cp), m.modality,
                                              m.correctness);
            std::filesystem::create_directories(path.parent_path());
            write_embeddings(EmbeddingSet(ids, dim, v, m), path);
          }
        }
      }
    }

    auto list = [](const auto& xs) {
      std::string s = "[";
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_same_v<std::decay_t<decltype(xs[i])>, int>) {
          s += std::to_string(xs[i]);
        } else {
          s += "\"" + xs[i] + "\"";
        }
      }
      return s + "]";
    };
    std::string cfg = "{\n  \"embedding_root\": \"code\",\n  \"semantic_sets\": {\"" + language +
                      "\": \"nl/" + language + ".rsae\"},\n  \"layers\": " + list(layers) +
                      ",\n  \"languages\": [\"" + language + "\"],\n  \"checkpoints\": " +
                      list(checkpoints) + ",\n  \"modalities\": " + list(modalities) +
                      ",\n  \"correctness\": " + list(correctness) + ",\n  \"seed\": 5" +
                      extra_json + "\n}\n";
    const auto path = root / "sweep.json";
    std::filesystem::create_directories(root);
    std::ofstream(path) << cfg;
    return path;
  }
};

}  // namespace testing
