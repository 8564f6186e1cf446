#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace interlock {

struct GeoPoint {
    double latitude = 0.0;
    double longitude = 0.0;

    // Rounded to 6 decimals; the canonical form used for equality of locations.
    GeoPoint canonical() const noexcept;
    bool valid() const noexcept;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
    friend auto operator<=>(const GeoPoint&, const GeoPoint&) = default;
};

enum class FirmStatus { Active, Inactive, Unknown };
enum class PositionStatus { Current, Past };

enum class RoleKind {
    ChiefExecutive,
    HighestExecutive,
    SupervisoryBoard,
    ExecutiveBoard,
    BoardOfDirectors,
    CommitteeMember,
    Other,
};

// Case-insensitive; spaces, hyphens, underscores and punctuation are ignored.
// Accepted spellings per role:
//   ChiefExecutive    chief executive officer, chief executive, ceo
//   HighestExecutive  highest executive
//   SupervisoryBoard  supervisory board, supervisory board member
//   ExecutiveBoard    executive board, executive board member, management board
//   BoardOfDirectors  board of directors, director, board member
//   CommitteeMember   committee member, member of a committee, committee
// Anything else maps to Other.
RoleKind parse_role(std::string_view text);
std::string_view role_name(RoleKind role) noexcept;
bool is_senior_role(RoleKind role) noexcept;

FirmStatus parse_firm_status(std::string_view text);
std::string_view firm_status_name(FirmStatus status) noexcept;
std::optional<PositionStatus> parse_position_status(std::string_view text);
std::string_view position_status_name(PositionStatus status) noexcept;

struct FirmRecord {
    std::string firm_id;
    std::string name;
    FirmStatus status = FirmStatus::Unknown;
    std::string city_name;
    std::string country;
    std::optional<GeoPoint> coordinates;

    friend bool operator==(const FirmRecord&, const FirmRecord&) = default;
};

struct PositionRecord {
    std::string firm_id;
    std::string person_id;
    RoleKind role = RoleKind::Other;
    PositionStatus status = PositionStatus::Current;

    friend bool operator==(const PositionRecord&, const PositionRecord&) = default;
    friend auto operator<=>(const PositionRecord&, const PositionRecord&) = default;
};

struct OwnershipLink {
    std::string parent_firm_id;
    std::string child_firm_id;
    double fraction = 0.0;

    friend bool operator==(const OwnershipLink&, const OwnershipLink&) = default;
};

// Rows read and rows skipped by a parser.
struct ParseReport {
    std::size_t rows = 0;
    std::size_t malformed = 0;
    std::vector<std::size_t> malformed_lines;  // first few, 1-based
};

template <typename Record>
struct Parsed {
    std::vector<Record> records;
    ParseReport report;
};

// Filtered two-mode affiliation table. Records are kept sorted by
// (person_id, firm_id, role, status) and unique.
class PositionTable {
public:
    PositionTable() = default;
    explicit PositionTable(std::vector<PositionRecord> records);

    const std::vector<PositionRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    // Number of distinct firms per person.
    const std::unordered_map<std::string, std::size_t>& person_firm_counts() const noexcept {
        return person_counts_;
    }
    std::size_t firm_count_of(const std::string& person_id) const;

    friend bool operator==(const PositionTable& a, const PositionTable& b) {
        return a.records_ == b.records_;
    }

private:
    std::vector<PositionRecord> records_;
    std::unordered_map<std::string, std::size_t> person_counts_;
};

inline constexpr const char* kFirmsHeader = "firm_id,name,status,city,country,lat,lon";
inline constexpr const char* kPositionsHeader = "firm_id,person_id,role,status";
inline constexpr const char* kOwnershipHeader = "parent_id,child_id,fraction";

// Parsers skip malformed rows and count them. Throws SchemaError on a header
// mismatch.
Parsed<FirmRecord> parse_firms(std::istream& in);
Parsed<PositionRecord> parse_positions(std::istream& in);
Parsed<OwnershipLink> parse_ownership(std::istream& in);

// File variants; throw IoError when the file cannot be opened.
Parsed<FirmRecord> read_firms(const std::string& path);
Parsed<PositionRecord> read_positions(const std::string& path);
Parsed<OwnershipLink> read_ownership(const std::string& path);

void write_firms(std::ostream& out, const std::vector<FirmRecord>& firms);
void write_positions(std::ostream& out, const std::vector<PositionRecord>& positions);
void write_ownership(std::ostream& out, const std::vector<OwnershipLink>& links);

std::vector<FirmRecord> filter_firms(const std::vector<FirmRecord>& firms);

// Keeps current positions in the six senior roles and collapses duplicates.
PositionTable filter_positions(const std::vector<PositionRecord>& positions);
inline PositionTable filter_positions(const PositionTable& table) {
    return filter_positions(table.records());
}

// Keeps only positions held at firms present in `firms` (typically the
// active-firm table).
PositionTable restrict_positions_to_firms(const PositionTable& positions,
                                          const std::vector<FirmRecord>& firms);

inline constexpr std::size_t kDefaultMaxPositions = 100;

// Drops every record of persons holding positions at more than
// `max_positions` distinct firms. Throws ParameterError if max_positions < 1.
PositionTable filter_mega_directors(const PositionTable& positions,
                                    std::size_t max_positions = kDefaultMaxPositions);

struct CleanTables {
    std::vector<FirmRecord> firms;
    PositionTable positions;
};

// Full selection: active firms; current senior positions at those firms;
// then the mega-director rule, counted on the filtered positions.
CleanTables clean_tables(const std::vector<FirmRecord>& firms,
                         const std::vector<PositionRecord>& positions,
                         std::size_t max_positions = kDefaultMaxPositions);

}  // namespace interlock
