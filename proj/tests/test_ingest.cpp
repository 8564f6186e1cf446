#include "interlock/csv.hpp"
#include "interlock/error.hpp"
#include "interlock/ingest.hpp"
#include "interlock/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

using namespace interlock;

namespace {

std::istringstream text(const std::string& s) { return std::istringstream(s); }

PositionRecord pos(std::string firm, std::string person, RoleKind role = RoleKind::BoardOfDirectors,
                   PositionStatus status = PositionStatus::Current) {
    return {std::move(firm), std::move(person), role, status};
}

// A person holding `firms` distinct board seats.
std::vector<PositionRecord> seats(const std::string& person, int firms) {
    std::vector<PositionRecord> out;
    for (int i = 0; i < firms; ++i) out.push_back(pos("F" + std::to_string(i), person));
    return out;
}

bool is_subset(const PositionTable& sub, const PositionTable& super) {
    return std::includes(super.records().begin(), super.records().end(), sub.records().begin(),
                         sub.records().end(), [](const auto& a, const auto& b) {
                             if (a.person_id != b.person_id) return a.person_id < b.person_id;
                             return a < b;
                         });
}

}  // namespace

TEST_CASE("csv reader handles quoting, embedded newlines and CRLF") {
    auto in = text("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",x,\r\n");
    csv::Reader r(in);
    std::vector<std::string> f;
    REQUIRE(r.next(f));
    CHECK(f == std::vector<std::string>{"a", "b,c", "say \"hi\""});
    REQUIRE(r.next(f));
    CHECK(f == std::vector<std::string>{"multi\nline", "x", ""});
    CHECK_FALSE(r.next(f));
}

TEST_CASE("csv reader flags an unterminated quote") {
    auto in = text("\"open,1\n");
    csv::Reader r(in);
    std::vector<std::string> f;
    REQUIRE(r.next(f));
    CHECK(r.malformed());
}

TEST_CASE("csv write_row round-trips awkward fields") {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "line\nbreak", ""};
    std::ostringstream out;
    csv::write_row(out, fields);
    auto in = text(out.str());
    csv::Reader r(in);
    std::vector<std::string> back;
    REQUIRE(r.next(back));
    CHECK(back == fields);
}

TEST_CASE("format_double round-trips") {
    for (double x : {0.1, -0.12, 51.5, 1e-7, 123456.789012, 0.5}) {
        CHECK(csv::parse_double(csv::format_double(x)) == x);
    }
}

TEST_CASE("parse_firms maps a row field by field") {
    auto in = text("firm_id,name,status,city,country,lat,lon\nF1,Acme,active,London,GB,51.5,-0.12\n");
    const auto parsed = parse_firms(in);
    REQUIRE(parsed.records.size() == 1);
    const auto& f = parsed.records[0];
    CHECK(f.firm_id == "F1");
    CHECK(f.name == "Acme");
    CHECK(f.status == FirmStatus::Active);
    CHECK(f.city_name == "London");
    CHECK(f.country == "GB");
    REQUIRE(f.coordinates);
    CHECK(f.coordinates->latitude == 51.5);
    CHECK(f.coordinates->longitude == -0.12);
    CHECK(parsed.report.malformed == 0);
}

TEST_CASE("parse_firms: empty or unparseable coordinates become absent") {
    auto in = text(
        "firm_id,name,status,city,country,lat,lon\n"
        "F1,Acme,active,London,GB,,\n"
        "F2,Beta,active,Paris,FR,abc,2.3\n"
        "F3,Gamma,active,Nowhere,XX,95,10\n");
    const auto parsed = parse_firms(in);
    REQUIRE(parsed.records.size() == 3);
    for (const auto& f : parsed.records) CHECK_FALSE(f.coordinates);
    CHECK(parsed.report.malformed == 0);
}

TEST_CASE("parse_firms: 3 valid rows and 1 malformed row") {
    auto in = text(
        "firm_id,name,status,city,country,lat,lon\n"
        "F1,A,active,London,GB,51.5,-0.12\n"
        "F2,B,inactive,Paris,FR,48.85,2.35\n"
        "F3,C,active,Berlin\n"
        "F4,D,active,Rome,IT,41.9,12.5\n");
    const auto parsed = parse_firms(in);
    CHECK(parsed.records.size() == 3);
    CHECK(parsed.report.malformed == 1);
    CHECK(parsed.report.rows == 4);
    CHECK(parsed.report.malformed_lines == std::vector<std::size_t>{4});
}

TEST_CASE("parsers reject a header mismatch with a schema error") {
    auto firms = text("id,name,status,city,country,lat,lon\n");
    CHECK_THROWS_AS(parse_firms(firms), SchemaError);
    auto positions = text("firm_id,person,role,status\n");
    CHECK_THROWS_AS(parse_positions(positions), SchemaError);
    auto ownership = text("");
    CHECK_THROWS_AS(parse_ownership(ownership), SchemaError);
}

TEST_CASE("header accepts a UTF-8 BOM and surrounding whitespace") {
    auto in = text("\xEF\xBB\xBF" "firm_id, person_id ,role,status\nF1,P1,director,current\n");
    CHECK(parse_positions(in).records.size() == 1);
}

TEST_CASE("file readers raise an I/O error for a missing file") {
    CHECK_THROWS_AS(read_firms("/nonexistent/firms.csv"), IoError);
}

TEST_CASE("status strings are matched case-insensitively after trimming") {
    CHECK(parse_firm_status(" ACTIVE ") == FirmStatus::Active);
    CHECK(parse_firm_status("Inactive") == FirmStatus::Inactive);
    CHECK(parse_firm_status("dissolved") == FirmStatus::Unknown);
    CHECK(parse_position_status(" Current") == PositionStatus::Current);
    CHECK(parse_position_status("PAST") == PositionStatus::Past);
    CHECK_FALSE(parse_position_status("former"));
}

TEST_CASE("role table") {
    CHECK(parse_role("Chief Executive Officer") == RoleKind::ChiefExecutive);
    CHECK(parse_role("CEO") == RoleKind::ChiefExecutive);
    CHECK(parse_role("highest-executive") == RoleKind::HighestExecutive);
    CHECK(parse_role("Supervisory Board") == RoleKind::SupervisoryBoard);
    CHECK(parse_role("executive_board") == RoleKind::ExecutiveBoard);
    CHECK(parse_role("Board of Directors") == RoleKind::BoardOfDirectors);
    CHECK(parse_role("Member of a Committee") == RoleKind::CommitteeMember);
    CHECK(parse_role("Secretary") == RoleKind::Other);
    for (RoleKind r : {RoleKind::ChiefExecutive, RoleKind::HighestExecutive, RoleKind::SupervisoryBoard,
                       RoleKind::ExecutiveBoard, RoleKind::BoardOfDirectors, RoleKind::CommitteeMember,
                       RoleKind::Other}) {
        CHECK(parse_role(role_name(r)) == r);
    }
}

TEST_CASE("parse_ownership: out-of-range fractions and self-ownership are malformed") {
    auto in = text(
        "parent_id,child_id,fraction\n"
        "A,B,0.6\n"
        "A,B,1.5\n"
        "A,A,0.9\n"
        "A,C,-0.1\n"
        "B,C,0.5\n");
    const auto parsed = parse_ownership(in);
    CHECK(parsed.records.size() == 2);
    CHECK(parsed.report.malformed == 3);
}

TEST_CASE("writers and parsers round-trip") {
    std::vector<FirmRecord> firms = {
        {"F1", "Acme, Inc.", FirmStatus::Active, "Brussel", "BE", GeoPoint{50.85, 4.35}},
        {"F2", "Quote \"Co\"", FirmStatus::Inactive, "Bruxelles", "BE", std::nullopt},
    };
    std::ostringstream out;
    write_firms(out, firms);
    auto in = text(out.str());
    CHECK(parse_firms(in).records == firms);

    std::vector<PositionRecord> positions = {pos("F1", "P1"), pos("F2", "P1", RoleKind::Other, PositionStatus::Past)};
    std::ostringstream pout;
    write_positions(pout, positions);
    auto pin = text(pout.str());
    CHECK(parse_positions(pin).records == positions);

    std::vector<OwnershipLink> links = {{"F1", "F2", 0.51}};
    std::ostringstream oout;
    write_ownership(oout, links);
    auto oin = text(oout.str());
    CHECK(parse_ownership(oin).records == links);
}

TEST_CASE("filter_firms keeps exactly the active records") {
    std::vector<FirmRecord> firms = {{"A", "", FirmStatus::Active, "", "", {}},
                                     {"B", "", FirmStatus::Inactive, "", "", {}},
                                     {"C", "", FirmStatus::Active, "", "", {}}};
    const auto kept = filter_firms(firms);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].firm_id == "A");
    CHECK(kept[1].firm_id == "C");

    for (auto& f : firms) f.status = FirmStatus::Inactive;
    CHECK(filter_firms(firms).empty());
}

TEST_CASE("filter_positions: status filter, role filter and dedup") {
    CHECK(filter_positions({pos("A", "P"), pos("A", "P", RoleKind::BoardOfDirectors, PositionStatus::Past)}).size() ==
          1);
    CHECK(filter_positions({pos("A", "P", RoleKind::Other)}).empty());
    CHECK(filter_positions({pos("A", "P"), pos("A", "P")}).size() == 1);
}

TEST_CASE("filter_mega_directors boundaries") {
    CHECK(filter_mega_directors(PositionTable(seats("P", 101))).empty());
    CHECK(filter_mega_directors(PositionTable(seats("P", 100))).size() == 100);

    std::vector<PositionRecord> all;
    for (const auto& [person, k] : std::vector<std::pair<std::string, int>>{{"A", 2}, {"B", 101}, {"C", 50}}) {
        auto s = seats(person, k);
        all.insert(all.end(), s.begin(), s.end());
    }
    const auto kept = filter_mega_directors(PositionTable(all));
    std::map<std::string, std::size_t> by_person;
    for (const auto& r : kept.records()) ++by_person[r.person_id];
    CHECK(by_person == std::map<std::string, std::size_t>{{"A", 2}, {"C", 50}});

    CHECK_THROWS_AS(filter_mega_directors(PositionTable(all), 0), ParameterError);
}

TEST_CASE("mega-director count uses distinct firms, not rows") {
    auto records = seats("P", 100);
    // Same firms again under other senior roles: still 100 distinct firms.
    for (int i = 0; i < 100; ++i) records.push_back(pos("F" + std::to_string(i), "P", RoleKind::ChiefExecutive));
    const PositionTable table(records);
    CHECK(table.firm_count_of("P") == 100);
    CHECK(filter_mega_directors(table).size() == 200);
}

TEST_CASE("mega-director rule is counted after the role and status filters") {
    auto records = seats("P", 100);
    records.push_back(pos("X", "P", RoleKind::Other));
    records.push_back(pos("Y", "P", RoleKind::BoardOfDirectors, PositionStatus::Past));
    std::vector<FirmRecord> firms;
    for (int i = 0; i < 100; ++i) firms.push_back({"F" + std::to_string(i), "", FirmStatus::Active, "", "", {}});
    firms.push_back({"X", "", FirmStatus::Active, "", "", {}});
    firms.push_back({"Y", "", FirmStatus::Active, "", "", {}});
    CHECK(clean_tables(firms, records).positions.size() == 100);
}

TEST_CASE("clean_tables drops positions at inactive or unknown firms") {
    std::vector<FirmRecord> firms = {{"A", "", FirmStatus::Active, "", "", {}},
                                     {"B", "", FirmStatus::Inactive, "", "", {}}};
    const auto t = clean_tables(firms, {pos("A", "P"), pos("B", "P"), pos("Z", "P")});
    REQUIRE(t.positions.size() == 1);
    CHECK(t.positions.records()[0].firm_id == "A");
    CHECK(t.firms.size() == 1);
}

TEST_CASE("property: filters are idempotent, monotone and keep counts consistent") {
    Rng rng(7);
    const RoleKind roles[] = {RoleKind::ChiefExecutive, RoleKind::BoardOfDirectors, RoleKind::Other,
                              RoleKind::CommitteeMember};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PositionRecord> raw;
        const int rows = 1 + static_cast<int>(rng.below(400));
        for (int i = 0; i < rows; ++i) {
            raw.push_back(pos("F" + std::to_string(rng.below(30)), "P" + std::to_string(rng.below(12)),
                              roles[rng.below(4)], rng.bernoulli(0.8) ? PositionStatus::Current : PositionStatus::Past));
        }
        const std::size_t max = 1 + rng.below(20);

        const PositionTable once = filter_positions(raw);
        CHECK(filter_positions(once) == once);
        CHECK(is_subset(once, PositionTable(raw)));
        for (const auto& r : once.records()) {
            CHECK(r.status == PositionStatus::Current);
            CHECK(is_senior_role(r.role));
        }

        const PositionTable mega = filter_mega_directors(once, max);
        CHECK(filter_mega_directors(mega, max) == mega);
        CHECK(is_subset(mega, once));

        std::map<std::string, std::set<std::string>> firms_of;
        for (const auto& r : mega.records()) firms_of[r.person_id].insert(r.firm_id);
        CHECK(mega.person_firm_counts().size() == firms_of.size());
        for (const auto& [person, firms] : firms_of) {
            CHECK(mega.firm_count_of(person) == firms.size());
            CHECK(firms.size() <= max);
        }
    }
}
