#include "minipbx/acl.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace minipbx::acl {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
}

// Collapses internal runs of whitespace so "CREATE  TEMPORARY TABLES"
// normalizes.
std::string squeeze(const std::string& s) {
    std::string out;
    bool space = false;
    for (char c : trim(s)) {
        if (c == ' ' || c == '\t') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

bool host_is_any(const std::string& h) { return h == "any" || h == "%" || h == "*"; }

struct NamedPriv {
    const char* name;
    Privilege priv;
};
const NamedPriv kAccess[] = {
    {"ALTER", Privilege::Alter},   {"CREATE", Privilege::Create},
    {"DELETE", Privilege::Delete}, {"DROP", Privilege::Drop},
    {"INDEX", Privilege::Index},   {"INSERT", Privilege::Insert},
    {"SELECT", Privilege::Select}, {"UPDATE", Privilege::Update},
};

struct NamedAdmin {
    const char* name;
    AdminPrivilege priv;
};
const NamedAdmin kAdmin[] = {
    {"CREATE TEMPORARY TABLES", AdminPrivilege::CreateTemporaryTables},
    {"FILE", AdminPrivilege::File},
    {"GRANT OPTION", AdminPrivilege::GrantOption},
    {"LOCK TABLES", AdminPrivilege::LockTables},
    {"PROCESS", AdminPrivilege::Process},
    {"RELOAD", AdminPrivilege::Reload},
    {"SUPER", AdminPrivilege::Super},
    {"SHUTDOWN", AdminPrivilege::Shutdown},
    {"SHUT DOWN", AdminPrivilege::Shutdown},  // spelling with a space accepted
    {"SHOW DATABASES", AdminPrivilege::ShowDatabases},
    {"REPLICATION CLIENT", AdminPrivilege::ReplicationClient},
    {"REPLICATION SLAVE", AdminPrivilege::ReplicationSlave},
};

}  // namespace

const std::vector<Privilege>& all_access_privileges() {
    static const std::vector<Privilege> all = {
        Privilege::Alter,  Privilege::Create, Privilege::Delete, Privilege::Drop,
        Privilege::Index,  Privilege::Insert, Privilege::Select, Privilege::Update,
    };
    return all;
}

const char* privilege_name(Privilege p) {
    for (const auto& n : kAccess)
        if (n.priv == p) return n.name;
    return "?";
}

const char* admin_privilege_name(AdminPrivilege p) {
    for (const auto& n : kAdmin)
        if (n.priv == p) return n.name;
    return "?";
}

std::optional<Privilege> privilege_from_name(const std::string& name) {
    std::string n = upper(squeeze(name));
    for (const auto& e : kAccess)
        if (n == e.name) return e.priv;
    return std::nullopt;
}

std::optional<AdminPrivilege> admin_privilege_from_name(const std::string& name) {
    std::string n = upper(squeeze(name));
    for (const auto& e : kAdmin)
        if (n == e.name) return e.priv;
    return std::nullopt;
}

bool ObjectScope::covers(const ObjectScope& o) const {
    bool db_ok = database == "*" || database == o.database;
    bool tbl_ok = table == "*" || table == o.table;
    return db_ok && tbl_ok;
}

Statement parse_statement(const std::string& text) {
    std::string t = squeeze(text);
    if (!t.empty() && t.back() == ';') t = trim(t.substr(0, t.size() - 1));
    std::string up = upper(t);

    Statement stmt;
    std::size_t pos;
    if (up.rfind("GRANT ", 0) == 0) {
        stmt.kind = Statement::Kind::Grant;
        pos = 6;
    } else if (up.rfind("REVOKE ", 0) == 0) {
        stmt.kind = Statement::Kind::Revoke;
        pos = 7;
    } else {
        throw StatementError("statement must start with GRANT or REVOKE");
    }

    auto on = up.find(" ON ", pos);
    if (on == std::string::npos) throw StatementError("missing ON clause");
    std::string priv_list = t.substr(pos, on - pos);

    // TO for grants; the bundled REVOKE examples use both TO and to/FROM.
    auto to = up.find(" TO ", on + 4);
    if (to == std::string::npos) to = up.find(" FROM ", on + 4);
    if (to == std::string::npos) throw StatementError("missing TO clause");
    std::size_t to_len = up.compare(to, 4, " TO ") == 0 ? 4 : 6;

    std::string scope_text = trim(t.substr(on + 4, to - on - 4));
    std::string rest = trim(t.substr(to + to_len));

    if (upper(squeeze(priv_list)) == "ALL") {
        stmt.all = true;
        stmt.privileges = all_access_privileges();
    } else {
        std::stringstream ss(priv_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = squeeze(item);
            if (item.empty()) throw StatementError("empty privilege name");
            if (auto p = privilege_from_name(item)) {
                if (std::find(stmt.privileges.begin(), stmt.privileges.end(), *p) ==
                    stmt.privileges.end())
                    stmt.privileges.push_back(*p);
            } else if (auto a = admin_privilege_from_name(item)) {
                stmt.admin_privileges.push_back(*a);
            } else {
                throw StatementError("unknown privilege '" + item + "'");
            }
        }
        if (stmt.privileges.empty() && stmt.admin_privileges.empty())
            throw StatementError("no privileges named");
    }

    auto dot = scope_text.find('.');
    if (dot == std::string::npos)
        throw StatementError("scope must be db.table or *.*, got '" + scope_text + "'");
    stmt.scope.database = trim(scope_text.substr(0, dot));
    stmt.scope.table = trim(scope_text.substr(dot + 1));
    if (stmt.scope.database.empty() || stmt.scope.table.empty())
        throw StatementError("malformed scope '" + scope_text + "'");

    // 'user'@host [IDENTIFIED BY 'pw']
    std::string up_rest = upper(rest);
    auto ident = up_rest.find("IDENTIFIED BY");
    std::string principal_text = rest;
    if (ident != std::string::npos) {
        principal_text = trim(rest.substr(0, ident));
        std::string pw = trim(rest.substr(ident + 13));
        if (pw.size() >= 2 && pw.front() == '\'' && pw.back() == '\'')
            pw = pw.substr(1, pw.size() - 2);
        stmt.password = pw;
    }
    auto at = principal_text.find('@');
    if (at == std::string::npos) throw StatementError("principal must be 'user'@host");
    std::string user = trim(principal_text.substr(0, at));
    std::string host = trim(principal_text.substr(at + 1));
    if (user.size() >= 2 && user.front() == '\'' && user.back() == '\'')
        user = user.substr(1, user.size() - 2);
    if (host.size() >= 2 && host.front() == '\'' && host.back() == '\'')
        host = host.substr(1, host.size() - 2);
    if (user.empty() || host.empty()) throw StatementError("malformed principal");
    stmt.principal = {user, host_is_any(host) ? "any" : host};
    return stmt;
}

std::vector<std::string> GrantTable::apply(const Statement& stmt) {
    std::vector<std::string> warnings;
    if (stmt.password) passwords_[stmt.principal] = *stmt.password;

    for (AdminPrivilege ap : stmt.admin_privileges) {
        auto pair = std::make_pair(stmt.principal, ap);
        auto it = std::find(admin_grants_.begin(), admin_grants_.end(), pair);
        if (stmt.kind == Statement::Kind::Grant) {
            if (it == admin_grants_.end()) admin_grants_.push_back(pair);
        } else if (it != admin_grants_.end()) {
            admin_grants_.erase(it);
        } else {
            warnings.push_back("no admin grant of " +
                               std::string(admin_privilege_name(ap)) + " for " +
                               stmt.principal.str());
        }
    }

    for (Privilege p : stmt.privileges) {
        if (stmt.kind == Statement::Kind::Grant) {
            // A fresh grant supersedes any shadow it fully covers.
            std::erase_if(shadows_, [&](const Entry& e) {
                return e.principal == stmt.principal && e.privilege == p &&
                       stmt.scope.covers(e.scope);
            });
            std::erase_if(grants_, [&](const Entry& e) {
                return e.principal == stmt.principal && e.privilege == p &&
                       e.scope == stmt.scope;
            });
            grants_.push_back({stmt.principal, stmt.scope, p, next_seq_++});
        } else {
            // Drop every grant the revoke covers outright.
            std::size_t removed = std::erase_if(grants_, [&](const Entry& e) {
                return e.principal == stmt.principal && e.privilege == p &&
                       stmt.scope.covers(e.scope);
            });
            std::erase_if(shadows_, [&](const Entry& e) {
                return e.principal == stmt.principal && e.privilege == p &&
                       stmt.scope.covers(e.scope);
            });
            // A wider grant still overlapping this scope needs a shadow so
            // the revoke takes effect inside it.
            auto overlaps = [&](const ObjectScope& a, const ObjectScope& b) {
                bool db = a.database == "*" || b.database == "*" || a.database == b.database;
                bool tbl = a.table == "*" || b.table == "*" || a.table == b.table;
                return db && tbl;
            };
            bool wider = std::any_of(grants_.begin(), grants_.end(), [&](const Entry& e) {
                return e.principal == stmt.principal && e.privilege == p &&
                       overlaps(e.scope, stmt.scope);
            });
            if (wider) {
                shadows_.push_back({stmt.principal, stmt.scope, p, next_seq_++});
            } else if (removed == 0) {
                warnings.push_back("no grant of " + std::string(privilege_name(p)) + " on " +
                                   stmt.scope.str() + " for " + stmt.principal.str());
            }
        }
    }
    return warnings;
}

bool GrantTable::check(const Principal& who, Privilege priv,
                       const ObjectScope& object) const {
    std::uint64_t newest_grant = 0, newest_shadow = 0;
    for (const auto& e : grants_)
        if (e.principal == who && e.privilege == priv && e.scope.covers(object))
            newest_grant = std::max(newest_grant, e.seq);
    if (newest_grant == 0) return false;
    for (const auto& e : shadows_)
        if (e.principal == who && e.privilege == priv && e.scope.covers(object))
            newest_shadow = std::max(newest_shadow, e.seq);
    return newest_grant > newest_shadow;
}

bool GrantTable::has_admin(const Principal& who, AdminPrivilege priv) const {
    return std::find(admin_grants_.begin(), admin_grants_.end(),
                     std::make_pair(who, priv)) != admin_grants_.end();
}

std::optional<std::string> GrantTable::password_of(const Principal& who) const {
    auto it = passwords_.find(who);
    if (it == passwords_.end()) return std::nullopt;
    return it->second;
}

std::string GrantTable::dump() const {
    std::ostringstream out;
    for (const auto& e : grants_)
        out << "grant\t" << e.principal.str() << '\t' << privilege_name(e.privilege) << '\t'
            << e.scope.str() << '\n';
    for (const auto& e : shadows_)
        out << "revoke\t" << e.principal.str() << '\t' << privilege_name(e.privilege) << '\t'
            << e.scope.str() << '\n';
    for (const auto& [principal, ap] : admin_grants_)
        out << "admin\t" << principal.str() << '\t' << admin_privilege_name(ap) << '\n';
    return out.str();
}

void AttendanceStore::upsert(StudentRecord rec) {
    for (auto& r : records_) {
        if (r.id == rec.id) {
            r = std::move(rec);
            return;
        }
    }
    records_.push_back(std::move(rec));
}

const StudentRecord* AttendanceStore::find(const std::string& id) const {
    for (const auto& r : records_)
        if (r.id == id) return &r;
    return nullptr;
}

AttendanceStore AttendanceStore::load(const std::string& text) {
    AttendanceStore store;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ls(line);
        StudentRecord rec;
        std::string att;
        if (!std::getline(ls, rec.id, '\t') || !std::getline(ls, rec.password_digest, '\t') ||
            !std::getline(ls, att))
            throw std::runtime_error("malformed attendance record: " + line);
        rec.attendance = std::stoi(att);
        if (rec.attendance < 0 || rec.attendance > 100)
            throw std::runtime_error("attendance out of range: " + line);
        store.upsert(std::move(rec));
    }
    return store;
}

std::string AttendanceStore::serialize() const {
    std::ostringstream out;
    for (const auto& r : records_)
        out << r.id << '\t' << r.password_digest << '\t' << r.attendance << '\n';
    return out.str();
}

std::variant<int, QueryError> query_attendance(const Principal& who, const std::string& id,
                                               const AttendanceStore& store,
                                               const GrantTable& grants,
                                               const ObjectScope& object) {
    if (!grants.check(who, Privilege::Select, object)) return QueryError::Denied;
    const StudentRecord* rec = store.find(id);
    if (!rec) return QueryError::NotFound;
    return rec->attendance;
}

}  // namespace minipbx::acl
