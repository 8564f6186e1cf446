#include "interlock/ingest.hpp"

#include "interlock/csv.hpp"
#include "interlock/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace interlock {

namespace {

constexpr std::size_t kMaxReportedLines = 20;

std::vector<std::string> split_header(const char* header) {
    std::vector<std::string> out;
    std::stringstream ss(header);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

// Lowercase alphanumerics only.
std::string squash(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        const auto uch = static_cast<unsigned char>(ch);
        if (std::isalnum(uch)) out.push_back(static_cast<char>(std::tolower(uch)));
    }
    return out;
}

void note_malformed(ParseReport& report, std::size_t line) {
    ++report.malformed;
    if (report.malformed_lines.size() < kMaxReportedLines) report.malformed_lines.push_back(line);
}

template <typename Record, typename RowFn>
Parsed<Record> parse_table(std::istream& in, const char* header, std::string_view name,
                           RowFn&& parse_row) {
    if (!in) throw IoError(std::string(name) + ": unreadable stream");
    const auto expected = split_header(header);
    csv::Reader reader(in);
    csv::expect_header(reader, expected, name);

    Parsed<Record> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;  // blank line
        ++out.report.rows;
        if (reader.malformed() || fields.size() != expected.size()) {
            note_malformed(out.report, reader.line());
            continue;
        }
        std::optional<Record> rec = parse_row(fields);
        if (!rec) {
            note_malformed(out.report, reader.line());
            continue;
        }
        out.records.push_back(std::move(*rec));
    }
    if (in.bad()) throw IoError(std::string(name) + ": read failure");
    return out;
}

template <typename Fn>
auto read_file(const std::string& path, Fn&& parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return parse(in);
}

}  // namespace

GeoPoint GeoPoint::canonical() const noexcept {
    auto round6 = [](double x) {
        double r = std::round(x * 1e6) / 1e6;
        return r == 0.0 ? 0.0 : r;  // fold -0.0
    };
    return {round6(latitude), round6(longitude)};
}

bool GeoPoint::valid() const noexcept {
    return std::isfinite(latitude) && std::isfinite(longitude) && latitude >= -90.0 &&
           latitude <= 90.0 && longitude >= -180.0 && longitude <= 180.0;
}

RoleKind parse_role(std::string_view text) {
    const std::string key = squash(text);
    if (key == "chiefexecutiveofficer" || key == "chiefexecutive" || key == "ceo") {
        return RoleKind::ChiefExecutive;
    }
    if (key == "highestexecutive") return RoleKind::HighestExecutive;
    if (key == "supervisoryboard" || key == "supervisoryboardmember") {
        return RoleKind::SupervisoryBoard;
    }
    if (key == "executiveboard" || key == "executiveboardmember" || key == "managementboard") {
        return RoleKind::ExecutiveBoard;
    }
    if (key == "boardofdirectors" || key == "director" || key == "boardmember") {
        return RoleKind::BoardOfDirectors;
    }
    if (key == "committeemember" || key == "memberofacommittee" || key == "committee") {
        return RoleKind::CommitteeMember;
    }
    return RoleKind::Other;
}

std::string_view role_name(RoleKind role) noexcept {
    switch (role) {
        case RoleKind::ChiefExecutive: return "chief executive officer";
        case RoleKind::HighestExecutive: return "highest executive";
        case RoleKind::SupervisoryBoard: return "supervisory board";
        case RoleKind::ExecutiveBoard: return "executive board";
        case RoleKind::BoardOfDirectors: return "board of directors";
        case RoleKind::CommitteeMember: return "committee member";
        case RoleKind::Other: return "other";
    }
    return "other";
}

bool is_senior_role(RoleKind role) noexcept { return role != RoleKind::Other; }

FirmStatus parse_firm_status(std::string_view text) {
    const std::string key = csv::to_lower(csv::trim(text));
    if (key == "active") return FirmStatus::Active;
    if (key == "inactive") return FirmStatus::Inactive;
    return FirmStatus::Unknown;
}

std::string_view firm_status_name(FirmStatus status) noexcept {
    switch (status) {
        case FirmStatus::Active: return "active";
        case FirmStatus::Inactive: return "inactive";
        case FirmStatus::Unknown: return "unknown";
    }
    return "unknown";
}

std::optional<PositionStatus> parse_position_status(std::string_view text) {
    const std::string key = csv::to_lower(csv::trim(text));
    if (key == "current") return PositionStatus::Current;
    if (key == "past") return PositionStatus::Past;
    return std::nullopt;
}

std::string_view position_status_name(PositionStatus status) noexcept {
    return status == PositionStatus::Current ? "current" : "past";
}

PositionTable::PositionTable(std::vector<PositionRecord> records) : records_(std::move(records)) {
    std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
        if (a.person_id != b.person_id) return a.person_id < b.person_id;
        return a < b;
    });
    records_.erase(std::unique(records_.begin(), records_.end()), records_.end());

    // Sorted by person then firm, so distinct firms are runs of unequal firm ids.
    person_counts_.reserve(records_.size() / 2 + 1);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        const bool new_firm = i == 0 || records_[i - 1].person_id != r.person_id ||
                              records_[i - 1].firm_id != r.firm_id;
        if (new_firm) ++person_counts_[r.person_id];
    }
}

std::size_t PositionTable::firm_count_of(const std::string& person_id) const {
    auto it = person_counts_.find(person_id);
    return it == person_counts_.end() ? 0 : it->second;
}

Parsed<FirmRecord> parse_firms(std::istream& in) {
    std::unordered_set<std::string> seen;
    return parse_table<FirmRecord>(
        in, kFirmsHeader, "firms.csv",
        [&seen](const std::vector<std::string>& f) -> std::optional<FirmRecord> {
            FirmRecord rec;
            rec.firm_id = csv::trim(f[0]);
            if (rec.firm_id.empty() || !seen.insert(rec.firm_id).second) return std::nullopt;
            rec.name = csv::trim(f[1]);
            rec.status = parse_firm_status(f[2]);
            rec.city_name = csv::trim(f[3]);
            rec.country = csv::trim(f[4]);
            const auto lat = csv::parse_double(f[5]);
            const auto lon = csv::parse_double(f[6]);
            if (lat && lon) {
                GeoPoint p{*lat, *lon};
                if (p.valid()) rec.coordinates = p;
            }
            return rec;
        });
}

Parsed<PositionRecord> parse_positions(std::istream& in) {
    return parse_table<PositionRecord>(
        in, kPositionsHeader, "positions.csv",
        [](const std::vector<std::string>& f) -> std::optional<PositionRecord> {
            PositionRecord rec;
            rec.firm_id = csv::trim(f[0]);
            rec.person_id = csv::trim(f[1]);
            if (rec.firm_id.empty() || rec.person_id.empty()) return std::nullopt;
            rec.role = parse_role(f[2]);
            const auto status = parse_position_status(f[3]);
            if (!status) return std::nullopt;
            rec.status = *status;
            return rec;
        });
}

Parsed<OwnershipLink> parse_ownership(std::istream& in) {
    return parse_table<OwnershipLink>(
        in, kOwnershipHeader, "ownership.csv",
        [](const std::vector<std::string>& f) -> std::optional<OwnershipLink> {
            OwnershipLink link;
            link.parent_firm_id = csv::trim(f[0]);
            link.child_firm_id = csv::trim(f[1]);
            const auto fraction = csv::parse_double(f[2]);
            if (link.parent_firm_id.empty() || link.child_firm_id.empty() ||
                link.parent_firm_id == link.child_firm_id || !fraction || *fraction < 0.0 ||
                *fraction > 1.0) {
                return std::nullopt;
            }
            link.fraction = *fraction;
            return link;
        });
}

Parsed<FirmRecord> read_firms(const std::string& path) {
    return read_file(path, [](std::istream& in) { return parse_firms(in); });
}
Parsed<PositionRecord> read_positions(const std::string& path) {
    return read_file(path, [](std::istream& in) { return parse_positions(in); });
}
Parsed<OwnershipLink> read_ownership(const std::string& path) {
    return read_file(path, [](std::istream& in) { return parse_ownership(in); });
}

void write_firms(std::ostream& out, const std::vector<FirmRecord>& firms) {
    out << kFirmsHeader << '\n';
    for (const auto& f : firms) {
        std::string lat, lon;
        if (f.coordinates) {
            lat = csv::format_double(f.coordinates->latitude);
            lon = csv::format_double(f.coordinates->longitude);
        }
        csv::write_row(out, {f.firm_id, f.name, std::string(firm_status_name(f.status)),
                             f.city_name, f.country, lat, lon});
    }
}

void write_positions(std::ostream& out, const std::vector<PositionRecord>& positions) {
    out << kPositionsHeader << '\n';
    for (const auto& p : positions) {
        csv::write_row(out, {p.firm_id, p.person_id, std::string(role_name(p.role)),
                             std::string(position_status_name(p.status))});
    }
}

void write_ownership(std::ostream& out, const std::vector<OwnershipLink>& links) {
    out << kOwnershipHeader << '\n';
    for (const auto& l : links) {
        csv::write_row(out, {l.parent_firm_id, l.child_firm_id, csv::format_double(l.fraction)});
    }
}

std::vector<FirmRecord> filter_firms(const std::vector<FirmRecord>& firms) {
    std::vector<FirmRecord> out;
    std::copy_if(firms.begin(), firms.end(), std::back_inserter(out),
                 [](const FirmRecord& f) { return f.status == FirmStatus::Active; });
    return out;
}

PositionTable filter_positions(const std::vector<PositionRecord>& positions) {
    std::vector<PositionRecord> kept;
    kept.reserve(positions.size());
    for (const auto& p : positions) {
        if (p.status == PositionStatus::Current && is_senior_role(p.role)) kept.push_back(p);
    }
    return PositionTable(std::move(kept));
}

PositionTable restrict_positions_to_firms(const PositionTable& positions,
                                          const std::vector<FirmRecord>& firms) {
    std::unordered_set<std::string> known;
    known.reserve(firms.size());
    for (const auto& f : firms) known.insert(f.firm_id);
    std::vector<PositionRecord> kept;
    kept.reserve(positions.size());
    for (const auto& r : positions.records()) {
        if (known.contains(r.firm_id)) kept.push_back(r);
    }
    return PositionTable(std::move(kept));
}

PositionTable filter_mega_directors(const PositionTable& positions, std::size_t max_positions) {
    if (max_positions < 1) throw ParameterError("max_positions must be at least 1");
    std::vector<PositionRecord> kept;
    kept.reserve(positions.size());
    for (const auto& r : positions.records()) {
        if (positions.firm_count_of(r.person_id) <= max_positions) kept.push_back(r);
    }
    return PositionTable(std::move(kept));
}

CleanTables clean_tables(const std::vector<FirmRecord>& firms,
                         const std::vector<PositionRecord>& positions, std::size_t max_positions) {
    CleanTables out;
    out.firms = filter_firms(firms);
    out.positions = filter_mega_directors(
        restrict_positions_to_firms(filter_positions(positions), out.firms), max_positions);
    return out;
}

}  // namespace interlock
