#include <benchmark/benchmark.h>

#include <memory>

#include "splatcage/cage_gen.hpp"
#include "splatcage/deform.hpp"
#include "splatcage/green.hpp"
#include "splatcage/jacobian_field.hpp"
#include "splatcage/loss.hpp"
#include "splatcage/optim.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/synthetic.hpp"

using namespace splatcage;

namespace {

CameraView view(int size) {
  CameraView v;
  v.elevation = 15.0;
  v.azimuth = 30.0;
  v.width = size;
  v.height = size;
  return v;
}

void BM_Tables(benchmark::State& state) {
  const CageMesh cage = icosphere(2, 1.0);
  const SplatCloud cloud = sphere_cloud(static_cast<int>(state.range(0)), 0.6, 0.03, 1);
  const auto pts = centroids(cloud);
  for (auto _ : state) benchmark::DoNotOptimize(compute_tables(cage, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Tables)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Transport(benchmark::State& state) {
  const CageMesh cage = icosphere(2, 1.0);
  const SplatCloud cloud = sphere_cloud(static_cast<int>(state.range(0)), 0.6, 0.03, 1);
  const CoordinateTables t = compute_tables(cage, centroids(cloud));
  const DeformedCage d = DeformedCage::rest(cage);
  for (auto _ : state) benchmark::DoNotOptimize(transport(cloud, t, d));
}
BENCHMARK(BM_Transport)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Silhouette(benchmark::State& state) {
  const SplatCloud cloud = sphere_cloud(5000, 0.6, 0.03, 1);
  const CameraView v = view(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_silhouette(cloud, v));
}
BENCHMARK(BM_Silhouette)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_RasterBackward(benchmark::State& state) {
  const SplatCloud cloud = sphere_cloud(5000, 0.6, 0.03, 1);
  const CameraView v = view(256);
  const RasterPass pass(cloud, v);
  const SilhouetteMask target(256, 256, 0.5);
  const SilhouetteMask grad = silhouette_loss_grad(pass.silhouette(), target);
  for (auto _ : state) benchmark::DoNotOptimize(pass.backward(&grad));
}
BENCHMARK(BM_RasterBackward)->Unit(benchmark::kMillisecond);

void BM_PoissonSolve(benchmark::State& state) {
  const CageMesh cage = icosphere(static_cast<int>(state.range(0)), 1.0);
  const PoissonSystem sys(cage);
  const std::vector<Mat3> ts(cage.num_faces(), Mat3::Identity());
  for (auto _ : state) benchmark::DoNotOptimize(solve_cage(sys, ts));
  state.counters["faces"] = static_cast<double>(cage.num_faces());
}
BENCHMARK(BM_PoissonSolve)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_GradientStep(benchmark::State& state) {
  BenchmarkOptions opt;
  opt.splats = 2000;
  opt.image_size = 128;
  const Benchmark b = translation_benchmark(opt);
  const DeformEngine engine(b.cloud, b.cage);
  MockGuidance guidance;
  DeformJob job;
  job.sketch_view = b.view;
  job.target = b.target;
  job.guidance = &guidance;
  const RgbImage reference = make_reference(engine, job);
  const VecX x = engine.initial_vector(Parameterization::Decomposed);
  for (auto _ : state) benchmark::DoNotOptimize(total_gradient(engine, job, x, 0, reference));
}
BENCHMARK(BM_GradientStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
