#ifndef MINIPBX_ACL_HPP
#define MINIPBX_ACL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace minipbx::acl {

// Database access privileges (grantable on objects).
enum class Privilege { Alter, Create, Delete, Drop, Index, Insert, Select, Update };

// Administrative privileges; these gate CLI admin commands, never object
// access, so check() refuses them.
enum class AdminPrivilege {
    CreateTemporaryTables,
    File,
    GrantOption,
    LockTables,
    Process,
    Reload,
    Super,
    Shutdown,
    ShowDatabases,
    ReplicationClient,
    ReplicationSlave,
};

const std::vector<Privilege>& all_access_privileges();
const char* privilege_name(Privilege p);
const char* admin_privilege_name(AdminPrivilege p);
std::optional<Privilege> privilege_from_name(const std::string& name);
std::optional<AdminPrivilege> admin_privilege_from_name(const std::string& name);

struct Principal {
    std::string user;
    std::string host;  // dotted quad, or "any"/"%" for any host

    bool operator==(const Principal&) const = default;
    auto operator<=>(const Principal&) const = default;
    std::string str() const { return "'" + user + "'@" + host; }
};

struct ObjectScope {
    std::string database = "*";
    std::string table = "*";

    bool operator==(const ObjectScope&) const = default;
    // True when this scope's wildcards cover `o` (o may itself be concrete
    // or wildcarded).
    bool covers(const ObjectScope& o) const;
    std::string str() const { return database + "." + table; }
};

class StatementError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Statement {
    enum class Kind { Grant, Revoke };
    Kind kind = Kind::Grant;
    bool all = false;  // ALL shorthand; priv list expanded to the access set
    std::vector<Privilege> privileges;
    std::vector<AdminPrivilege> admin_privileges;
    ObjectScope scope;
    Principal principal;
    std::optional<std::string> password;  // IDENTIFIED BY
};

// "GRANT INSERT,UPDATE, ALTER on p.q TO 'abc'@10.0.0.5 IDENTIFIED BY 'abc'"
Statement parse_statement(const std::string& text);

// Grant table with last-statement-wins semantics. A scoped REVOKE under a
// wider GRANT stores a revoke shadow; authorization compares the newest
// covering grant against the newest covering shadow.
class GrantTable {
public:
    struct Entry {
        Principal principal;
        ObjectScope scope;
        Privilege privilege;
        std::uint64_t seq;
    };

    std::vector<std::string> apply(const Statement& stmt);

    bool check(const Principal& who, Privilege priv, const ObjectScope& object) const;
    bool has_admin(const Principal& who, AdminPrivilege priv) const;
    std::optional<std::string> password_of(const Principal& who) const;

    const std::vector<Entry>& grants() const { return grants_; }
    const std::vector<Entry>& shadows() const { return shadows_; }

    std::string dump() const;

private:
    std::vector<Entry> grants_;
    std::vector<Entry> shadows_;
    std::vector<std::pair<Principal, AdminPrivilege>> admin_grants_;
    std::map<Principal, std::string> passwords_;
    std::uint64_t next_seq_ = 1;
};

struct StudentRecord {
    std::string id;               // decimal digits
    std::string password_digest;  // md5 hex of the decimal password
    int attendance = 0;           // 0..100
};

// Line-oriented datastore: one tab-separated record per student.
class AttendanceStore {
public:
    void upsert(StudentRecord rec);
    const StudentRecord* find(const std::string& id) const;
    std::size_t size() const { return records_.size(); }

    static AttendanceStore load(const std::string& text);
    std::string serialize() const;

private:
    std::vector<StudentRecord> records_;
};

enum class QueryError { Denied, NotFound };

// The one read path the IVR uses; every access passes the SELECT gate.
std::variant<int, QueryError> query_attendance(const Principal& who, const std::string& id,
                                               const AttendanceStore& store,
                                               const GrantTable& grants,
                                               const ObjectScope& object);

}  // namespace minipbx::acl

#endif
