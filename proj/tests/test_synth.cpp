#include "interlock/error.hpp"
#include "interlock/interlock_graph.hpp"
#include "interlock/synth.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace interlock;

namespace {

std::string firms_csv(const SyntheticDataset& d) {
    std::ostringstream out;
    write_firms(out, d.firms);
    return out.str();
}

std::string positions_csv(const SyntheticDataset& d) {
    std::ostringstream out;
    write_positions(out, d.positions);
    return out.str();
}

std::string ownership_csv(const SyntheticDataset& d) {
    std::ostringstream out;
    write_ownership(out, d.ownership);
    return out.str();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::uint32_t> firm_community(const SyntheticDataset& d) {
    std::map<std::string, std::uint32_t> out;
    for (std::size_t i = 0; i < d.truth_firm_ids.size(); ++i) {
        out[d.truth_firm_ids[i]] = d.truth_city_community[d.truth_firm_city[i]];
    }
    return out;
}

}  // namespace

TEST_CASE("same seed gives byte-identical files; a different seed does not") {
    auto config = PlantedConfig::uniform(3, 5, 4, 0.3, 0.01, 9);
    config.mega_directors = 2;
    config.mega_director_positions = 30;
    config.ownership_ties = 3;
    config.noise_positions = 5;
    const auto dir = std::filesystem::temp_directory_path() / "interlock_synth_test";
    std::filesystem::remove_all(dir);
    write_dataset(generate_planted(config), (dir / "a").string());
    write_dataset(generate_planted(config), (dir / "b").string());
    for (const char* f : {"firms.csv", "positions.csv", "ownership.csv", "truth_city.csv", "truth_community.csv"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK_FALSE(slurp(dir / "a" / f).empty());
    }
    config.seed = 10;
    write_dataset(generate_planted(config), (dir / "c").string());
    CHECK(slurp(dir / "a" / "positions.csv") != slurp(dir / "c" / "positions.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("p_in = p_out = 0 gives an empty interlock graph") {
    const auto d = generate_planted(PlantedConfig::uniform(3, 4, 5, 0.0, 0.0, 1));
    CHECK(d.planted_pairs.empty());
    const auto clean = clean_tables(d.firms, d.positions);
    const auto g = project_interlocks(clean.positions);
    CHECK(g.graph.edge_count() == 0);
}

TEST_CASE("p_in = 1, p_out = 0 with two communities gives two components matching them") {
    const auto d = generate_planted(PlantedConfig::uniform(2, 3, 4, 1.0, 0.0, 5));
    const auto g = project_interlocks(clean_tables(d.firms, d.positions).positions);
    const auto cc = connected_components(g);
    REQUIRE(cc.stats.component_count == 2);
    const auto truth = firm_community(d);
    CHECK(g.node_count() == truth.size());
    const auto labels = label_components(g.graph);
    for (NodeId v = 0; v < g.node_count(); ++v) {
        for (NodeId w = 0; w < g.node_count(); ++w) {
            CHECK((labels.labels[v] == labels.labels[w]) ==
                  (truth.at(g.firm_ids[v]) == truth.at(g.firm_ids[w])));
        }
    }
    // 12 firms per community, every pair interlocked once.
    CHECK(g.graph.total_edge_weight() == 2 * 66);
}

TEST_CASE("round-trip: ingest reproduces the intended filtered table") {
    auto config = PlantedConfig::uniform(4, 6, 5, 0.2, 0.01, 21);
    config.mega_directors = 3;
    config.mega_director_positions = 101;
    config.ownership_ties = 10;
    config.ownership_noise = 5;
    config.inactive_firms = 4;
    config.noise_positions = 20;
    config.missing_coordinate_firms = 3;
    config.directors_per_firm = 2;
    const auto d = generate_planted(config);
    CHECK(d.mega_director_ids.size() == 3);

    std::istringstream f(firms_csv(d)), p(positions_csv(d)), o(ownership_csv(d));
    const auto firms = parse_firms(f);
    const auto positions = parse_positions(p);
    const auto ownership = parse_ownership(o);
    CHECK(firms.report.malformed == 0);
    CHECK(positions.report.malformed == 0);
    CHECK(ownership.report.malformed == 0);
    CHECK(firms.records == d.firms);
    CHECK(positions.records == d.positions);
    CHECK(ownership.records == d.ownership);

    const auto clean = clean_tables(firms.records, positions.records);
    CHECK(clean.positions == PositionTable(d.expected_positions));
    for (const auto& id : d.mega_director_ids) CHECK(clean.positions.firm_count_of(id) == 0);
    CHECK(clean.firms.size() == d.truth_firm_ids.size());

    // Owned pairs are removable; the 0.5 noise link is not.
    const auto g = project_interlocks(clean.positions);
    const auto filtered = remove_ownership_ties(g, ownership.records);
    for (const auto& [a, b] : d.owned_pairs) {
        const auto ia = filtered.index_of(a), ib = filtered.index_of(b);
        REQUIRE(ia);
        REQUIRE(ib);
        CHECK(g.graph.edge_weight(*ia, *ib) > 0);
        CHECK(filtered.graph.edge_weight(*ia, *ib) == 0);
    }
    const auto boundary = std::find_if(d.ownership.begin(), d.ownership.end(),
                                       [](const OwnershipLink& l) { return l.fraction == 0.5; });
    CHECK(boundary != d.ownership.end());

    std::size_t missing = 0;
    for (const auto& firm : d.firms) missing += !firm.coordinates;
    CHECK(missing == 3);
}

TEST_CASE("property: realized intra and inter pair counts stay within 4 sigma") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto config = PlantedConfig::uniform(4, 5, 6, 0.2, 0.01, seed);
        const auto d = generate_planted(config);
        const double per = 5.0 * 6.0;
        const double intra_pairs = 4 * per * (per - 1) / 2;
        const double all_pairs = 4 * per * (4 * per - 1) / 2;
        const double inter_pairs = all_pairs - intra_pairs;
        auto within = [](double observed, double n, double p) {
            return std::abs(observed - n * p) <= 4 * std::sqrt(n * p * (1 - p));
        };
        CHECK(within(static_cast<double>(d.intra_pairs), intra_pairs, 0.2));
        CHECK(within(static_cast<double>(d.inter_pairs), inter_pairs, 0.01));

        // The recorded split matches the truth labels.
        const auto truth = firm_community(d);
        std::size_t intra = 0;
        for (const auto& [a, b] : d.planted_pairs) intra += truth.at(a) == truth.at(b);
        CHECK(intra == d.intra_pairs);
        CHECK(d.planted_pairs.size() == d.intra_pairs + d.inter_pairs);
    }
}

TEST_CASE("heavy-tailed city sizes") {
    auto config = PlantedConfig::uniform(2, 30, 5, 0.05, 0.001, 3);
    config.city_size_exponent = 1.5;
    config.max_firms_per_city = 200;
    const auto d = generate_planted(config);
    std::map<std::uint32_t, std::size_t> per_city;
    for (auto c : d.truth_firm_city) ++per_city[c];
    std::size_t smallest = SIZE_MAX, largest = 0;
    for (const auto& [_, n] : per_city) {
        smallest = std::min(smallest, n);
        largest = std::max(largest, n);
    }
    CHECK(smallest >= 5);
    CHECK(largest <= 200);
    CHECK(largest > smallest);
}

TEST_CASE("validate rejects infeasible configs") {
    auto good = PlantedConfig::uniform(2, 3, 4, 0.3, 0.01, 1);
    CHECK_NOTHROW(good.validate());
    auto bad = good;
    bad.p_in = 1.5;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = good;
    bad.p_out = -0.1;
    CHECK_THROWS_AS(generate_planted(bad), ParameterError);
    bad = good;
    bad.firms_per_city = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = good;
    bad.communities.clear();
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = good;
    bad.mega_directors = 1;
    bad.mega_director_positions = 10'000;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = good;
    bad.missing_coordinate_firms = 1'000;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("score_recovery") {
    std::vector<std::uint32_t> truth(100);
    for (std::size_t i = 0; i < 100; ++i) truth[i] = static_cast<std::uint32_t>(i / 25);

    auto same = score_recovery(truth, truth);
    CHECK(same.nmi == doctest::Approx(1.0));
    CHECK(same.exact_match);

    std::vector<std::uint32_t> relabeled(truth);
    for (auto& c : relabeled) c = 3 - c;
    CHECK(score_recovery(relabeled, truth).exact_match);

    const std::vector<std::uint32_t> two = {0, 0, 1, 1};
    const auto single = score_recovery(std::vector<std::uint32_t>(4, 0), two);
    CHECK(single.nmi == 0.0);
    CHECK_FALSE(single.exact_match);

    auto one_off = truth;
    one_off[0] = 1;
    const auto r = score_recovery(one_off, truth);
    CHECK_FALSE(r.exact_match);
    CHECK(r.nmi == doctest::Approx(oracle::nmi(one_off, truth)).epsilon(1e-12));
    CHECK(r.nmi > 0.9);
    CHECK(r.nmi < 1.0);

    CHECK_THROWS_AS(score_recovery(two, truth), ContractViolation);
}
