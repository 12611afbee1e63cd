#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "chadkit/conceptbench.hpp"
#include "chadkit/eval.hpp"
#include "chadkit/negsampler.hpp"
#include "chadkit/synthetic.hpp"
#include "chadkit/trainer.hpp"

using namespace chadkit;

namespace {

struct Fixture {
  data::Dataset train;
  model::ChadModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    synth::StructuredConfig g;
    g.rows = 4096;
    const auto raw = synth::make_structured_dataset(g);
    const auto stats = data::fit_normalize(raw);
    Fixture out;
    out.train = data::apply_normalize(stats, raw);
    out.model = model::ChadModel::create(out.train.schema, out.train.vocabularies, stats, {}, 1);
    return out;
  }();
  return f;
}

std::vector<data::Record> negatives_for(const std::vector<data::Record>& rs, int k) {
  const negsample::NegativeSampler sampler({k, 0.5, 0.75}, fixture().train.arities(), 6);
  std::vector<data::Record> out;
  for (const auto& r : rs) {
    for (auto& n : sampler.generate(r, 3, 0)) out.push_back(std::move(n));
  }
  return out;
}

}  // namespace

static void BM_Score(benchmark::State& state) {
  const auto& f = fixture();
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::vector<data::Record> rs(f.train.records.begin(), f.train.records.begin() + n);
  const auto batch = model::make_batch(rs);
  for (auto _ : state) benchmark::DoNotOptimize(f.model.score(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Score)->Arg(256)->Arg(4096);

static void BM_JointLossBackward(benchmark::State& state) {
  const auto& f = fixture();
  const int k = static_cast<int>(state.range(0));
  const std::vector<data::Record> rs(f.train.records.begin(), f.train.records.begin() + 256);
  const auto batch = model::make_batch(rs);
  const auto negs = model::make_batch(negatives_for(rs, k));
  auto grad = train::ModelGrad::for_model(f.model);
  Rng rng(1);
  const auto noise = model::standard_normal(f.model.autoencoder.latent_dim(), negs.size(), rng);
  train::JointLossOptions opt;
  opt.gates = {true, true};
  opt.negatives_per_record = k;
  opt.noise = &noise;
  opt.dropout_rng = &rng;
  for (auto _ : state) {
    grad.zero();
    benchmark::DoNotOptimize(train::joint_loss(f.model, batch, negs, opt, &grad).total);
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_JointLossBackward)->Arg(1)->Arg(10);

static void BM_NegativeGeneration(benchmark::State& state) {
  const auto& f = fixture();
  const negsample::NegativeSampler sampler({10, 0.5, 0.75}, f.train.arities(), 6);
  Rng rng(2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler.generate(f.train.records[i++ % f.train.size()], rng));
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_NegativeGeneration);

static void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> s(n);
  std::unique_ptr<bool[]> y(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::normal_distribution<double>(0, 1)(rng);
    y[i] = i % 10 == 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::average_precision(s, {y.get(), n}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AveragePrecision)->Arg(1000)->Arg(100000);

static void BM_KMeans(benchmark::State& state) {
  auto c = concept_bench::ConceptConfig::defaults();
  Rng rng(4);
  const auto d = concept_bench::gen_concept_data(c, rng);
  const auto nominal = d.nominal();
  for (auto _ : state) benchmark::DoNotOptimize(concept_bench::fit_kmeans(nominal, 2, 5).centers);
}
BENCHMARK(BM_KMeans);

static void BM_GmmEm(benchmark::State& state) {
  auto c = concept_bench::ConceptConfig::defaults();
  Rng rng(4);
  const auto d = concept_bench::gen_concept_data(c, rng);
  const auto nominal = d.nominal();
  for (auto _ : state) benchmark::DoNotOptimize(concept_bench::fit_gmm_em(nominal, 2, 5).weights);
}
BENCHMARK(BM_GmmEm);

BENCHMARK_MAIN();
