#include <benchmark/benchmark.h>

#include "gasl/generators.hpp"
#include "gasl/harness.hpp"

using namespace gasl;

namespace {

struct Fixture {
  hrn::DatasetBundle data;
  gen::Batch batch;

  Fixture() {
    hrn::SyntheticDatasetSpec spec;
    spec.p = 6;
    spec.q = 3;
    spec.d_x = 16;
    spec.d_a = 8;
    spec.samples_per_class = 8;
    spec.seed = 7;
    data = hrn::make_synthetic_dataset(spec);
    IndexList seen;
    for (long i = 0; i < data.features.size(); ++i)
      if (data.features.y[i] <= spec.p) seen.push_back(i);
    Mat X(static_cast<long>(seen.size()), spec.d_x);
    std::vector<Label> y(seen.size());
    for (std::size_t k = 0; k < seen.size(); ++k) {
      X.row(static_cast<long>(k)) = data.features.X.row(seen[k]);
      y[k] = data.features.y[seen[k]];
    }
    batch = gen::make_batch(X, y, data.semantics);
  }

  gen::ModelState state(ModelKind kind) const {
    HyperParams hp;
    hp.hidden_dim = 16;
    hp.latent_dim = 4;
    hp.noise_dim = 4;
    gen::ModelState s = gen::make_model_state(kind, 16, data.semantics, 6, hp, 11);
    if (kind == ModelKind::lisgan) {
      s.souls = gen::soul_samples(batch.X, batch.y, hp.soul_clusters, 3,
                                  &s.soul_labels);
    }
    if (kind == ModelKind::lsrgan)
      gen::lsrgan_set_real_means(s, batch.X, batch.y);
    return s;
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Objective(benchmark::State& state) {
  ModelKind kind = kAllModels[state.range(0)];
  gen::ModelState s = fixture().state(kind);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto breakdown = gen::objective(s, fixture().batch, nullptr, seed++);
    benchmark::DoNotOptimize(breakdown.total);
  }
  state.SetLabel(to_string(kind));
}

void BM_ObjectiveWithGrads(benchmark::State& state) {
  ModelKind kind = kAllModels[state.range(0)];
  gen::ModelState s = fixture().state(kind);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    std::map<std::string, Mat> grads;
    auto breakdown =
        gen::objective_with_grads(s, fixture().batch, nullptr, seed++, &grads);
    benchmark::DoNotOptimize(breakdown.total);
  }
  state.SetLabel(to_string(kind));
}

void BM_Synthesize(benchmark::State& state) {
  gen::ModelState s = fixture().state(ModelKind::fclswgan);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    FeatureSet fs_ = gen::synthesize_features(s, fixture().data.semantics,
                                              {7, 8, 9}, 30, seed++);
    benchmark::DoNotOptimize(fs_.X.sum());
  }
}

}  // namespace

BENCHMARK(BM_Objective)->DenseRange(0, 9);
BENCHMARK(BM_ObjectiveWithGrads)->DenseRange(0, 9);
BENCHMARK(BM_Synthesize);

BENCHMARK_MAIN();
