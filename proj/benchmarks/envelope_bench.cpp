#include <benchmark/benchmark.h>

#include "mqttbed/smarthome/envelope.hpp"

using namespace mqttbed;

namespace {

smarthome::EnvelopeKey bench_key() {
    smarthome::EnvelopeKey k{};
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<std::uint8_t>(i);
    return k;
}

void BM_Seal(benchmark::State& state) {
    auto key = bench_key();
    wire::Bytes payload(static_cast<std::size_t>(state.range(0)), 0x5a);
    for (auto _ : state) {
        auto s = smarthome::seal(payload, "home/livingroom/temperature", key);
        benchmark::DoNotOptimize(s);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * payload.size()));
}
BENCHMARK(BM_Seal)->Arg(24)->Arg(1024);

void BM_OpenWire(benchmark::State& state) {
    auto key = bench_key();
    wire::Bytes payload(static_cast<std::size_t>(state.range(0)), 0x5a);
    auto sealed = smarthome::seal(payload, "home/livingroom/temperature", key).to_wire();
    for (auto _ : state) {
        auto p = smarthome::open_wire(sealed, "home/livingroom/temperature", key);
        benchmark::DoNotOptimize(p);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * payload.size()));
}
BENCHMARK(BM_OpenWire)->Arg(24)->Arg(1024);

}  // namespace
