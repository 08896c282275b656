#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "attrib/attribution.hpp"
#include "attrib/dataset.hpp"
#include "attrib/model.hpp"
#include "attrib/reference.hpp"

using namespace attrib;

namespace {

double timed(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

int main(int argc, char** argv) {
    const int threads = argc > 1 ? std::atoi(argv[1]) : 4;
    omp_set_num_threads(threads);

    const FeatureTable raw = synthesize(2000, SyntheticSpec::heloc_like(), 3);
    auto [table, scaler] = standardize(raw);
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 3;
    const MlpModel mlp = train_mlp(table, tc, table);

    std::printf("threads: %d\n", threads);
    std::printf("%-22s %10s %10s %9s %12s\n", "kernel", "serial s",
                "threaded s", "speedup", "max |diff|");

    {
        std::vector<std::vector<double>> candidates;
        for (std::size_t i = 0; i < 500; ++i) {
            const auto row = table.row(i);
            candidates.emplace_back(row.begin(), row.end());
        }
        const std::vector<double> ref(table.cols(), 0.0);
        const ReferenceFn ref_for = [&](std::size_t, std::span<const double>) {
            return ref;
        };
        BatchParams params;
        params.method = Method::integrated_gradients;
        params.ig_steps = 200;

        BatchResult serial, threaded;
        const double ts = timed([&] {
            serial = explain_batch_serial(mlp, candidates, params, ref_for);
        });
        const double tp = timed([&] {
            threaded = explain_batch(mlp, candidates, params, ref_for);
        });
        double diff = 0.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            for (std::size_t j = 0; j < table.cols(); ++j) {
                diff = std::max(diff,
                                std::abs(serial.attributions[i].values[j] -
                                         threaded.attributions[i].values[j]));
            }
        }
        std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n",
                    "explain_batch (ig)", ts, tp, ts / tp, diff);
    }

    {
        ReferenceSet serial, threaded;
        const double ts = timed([&] {
            serial = boundary_references_serial(mlp, scaler, 200, 0.05, 9);
        });
        const double tp = timed([&] {
            threaded = boundary_references(mlp, scaler, 200, 0.05, 9);
        });
        double diff = 0.0;
        for (std::size_t i = 0; i < serial.references.size(); ++i) {
            for (std::size_t j = 0; j < table.cols(); ++j) {
                diff = std::max(diff, std::abs(serial.references[i][j] -
                                               threaded.references[i][j]));
            }
        }
        std::printf("%-22s %10.3f %10.3f %8.2fx %12.3e\n",
                    "boundary_references", ts, tp, ts / tp, diff);
    }
    return 0;
}
