#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "mqttbed/broker/subscription_tree.hpp"
#include "mqttbed/wire/topic.hpp"
#include "packet_gen.hpp"

using namespace mqttbed;

namespace {

void BM_TopicMatches(benchmark::State& state) {
    mqttbed::testing::PacketGenerator gen(5);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 1024; ++i) pairs.emplace_back(gen.topic_filter(), gen.topic_name());
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& [f, n] = pairs[i++ % pairs.size()];
        benchmark::DoNotOptimize(wire::topic_matches(f, n));
    }
}
BENCHMARK(BM_TopicMatches);

// Routing cost against a tree holding N filters, one per client.
void BM_SubscriptionTreeMatch(benchmark::State& state) {
    mqttbed::testing::PacketGenerator gen(6);
    broker::SubscriptionTree tree;
    for (int i = 0; i < state.range(0); ++i) tree.insert(gen.topic_filter(), "c" + std::to_string(i), 1);
    std::vector<std::string> names;
    for (int i = 0; i < 256; ++i) names.push_back(gen.topic_name());
    std::size_t i = 0, hits = 0;
    for (auto _ : state) tree.match(names[i++ % names.size()], [&](const std::string&, std::uint8_t) { ++hits; });
    benchmark::DoNotOptimize(hits);
}
BENCHMARK(BM_SubscriptionTreeMatch)->Arg(10)->Arg(1000)->Arg(10000);

}  // namespace
