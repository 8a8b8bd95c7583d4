#include "minipbx/confkit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace minipbx::confkit {

namespace {

const char* const kKnownOps[] = {"Playback", "Hangup",    "Read",      "Goto",
                                 "Dial",     "MYSQL",     "SayDigits", "VoiceMailMain"};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool all_digits(const std::string& s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Splits into lines, stripping CR; keeps 1-based numbering alongside.
std::vector<std::pair<int, std::string>> logical_lines(const std::string& text) {
    std::vector<std::pair<int, std::string>> out;
    std::string cur;
    int n = 1;
    for (char c : text) {
        if (c == '\n') {
            out.emplace_back(n++, cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.emplace_back(n, cur);
    return out;
}

bool is_comment_or_blank(const std::string& line) {
    std::string t = trim(line);
    return t.empty() || t[0] == ';' || t[0] == '#';
}

// "[name]" -> name, or nullopt.
std::optional<std::string> section_header(const std::string& line, const std::string& file,
                                          int lineno) {
    std::string t = trim(line);
    if (t.empty() || t[0] != '[') return std::nullopt;
    auto close = t.find(']');
    if (close == std::string::npos)
        throw ParseError(file, lineno, "unterminated section header");
    std::string name = trim(t.substr(1, close - 1));
    if (name.empty()) throw ParseError(file, lineno, "empty section name");
    std::string rest = trim(t.substr(close + 1));
    if (!rest.empty() && rest[0] != ';' && rest[0] != '#')
        throw ParseError(file, lineno, "trailing text after section header");
    return name;
}

std::optional<MailboxRef> parse_mailbox_ref(const std::string& v, const std::string& file,
                                            int lineno) {
    auto at = v.find('@');
    if (at == std::string::npos || at == 0 || at + 1 >= v.size())
        throw ParseError(file, lineno, "mailbox must be box@context, got '" + v + "'");
    MailboxRef ref{trim(v.substr(0, at)), trim(v.substr(at + 1))};
    if (!all_digits(ref.box))
        throw ParseError(file, lineno, "mailbox number must be decimal digits");
    return ref;
}

}  // namespace

bool is_known_operation(const std::string& name) {
    std::string n = lower(name);
    for (const char* op : kKnownOps)
        if (lower(op) == n) return true;
    return false;
}

const ContextBlock* DialplanDoc::find(const std::string& name) const {
    for (const auto& c : contexts)
        if (c.name == name) return &c;
    return nullptr;
}

const std::vector<MailboxEntry>* VoicemailDoc::find_context(const std::string& name) const {
    for (const auto& [ctx, boxes] : contexts)
        if (ctx == name) return &boxes;
    return nullptr;
}

const MailboxEntry* VoicemailDoc::find_box(const std::string& box,
                                           const std::string& context) const {
    const auto* boxes = find_context(context);
    if (!boxes) return nullptr;
    for (const auto& e : *boxes)
        if (e.box == box) return &e;
    return nullptr;
}

const Credential* CredentialTable::find(const std::string& user) const {
    for (const auto& e : entries)
        if (e.user == user) return &e;
    return nullptr;
}

bool ValidationReport::ok() const {
    for (const auto& f : findings)
        if (f.severity == Severity::Error) return false;
    return true;
}

std::vector<const Finding*> ValidationReport::errors() const {
    std::vector<const Finding*> out;
    for (const auto& f : findings)
        if (f.severity == Severity::Error) out.push_back(&f);
    return out;
}

std::vector<PeerEntry> parse_sip_conf(const std::string& text, const std::string& file) {
    std::vector<PeerEntry> peers;
    PeerEntry* cur = nullptr;
    std::set<std::string> seen;

    for (const auto& [lineno, raw] : logical_lines(text)) {
        if (is_comment_or_blank(raw)) continue;
        if (auto name = section_header(raw, file, lineno)) {
            if (!seen.insert(*name).second)
                throw ParseError(file, lineno, "duplicate peer name '" + *name + "'");
            peers.push_back(PeerEntry{});
            cur = &peers.back();
            cur->name = *name;
            continue;
        }
        std::string t = trim(raw);
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(file, lineno, "expected key=value, got '" + t + "'");
        if (!cur) throw ParseError(file, lineno, "key=value before any [peer] section");
        std::string key = lower(trim(t.substr(0, eq)));
        std::string value = trim(t.substr(eq + 1));
        // strip a trailing comment
        if (auto semi = value.find(';'); semi != std::string::npos)
            value = trim(value.substr(0, semi));

        if (key == "type") {
            std::string v = lower(value);
            if (v == "friend")
                cur->type = PeerType::Friend;
            else if (v == "peer")
                cur->type = PeerType::Peer;
            else if (v == "user")
                cur->type = PeerType::User;
            else
                throw ParseError(file, lineno, "type must be friend, peer or user");
        } else if (key == "username") {
            cur->username = value;
        } else if (key == "host") {
            cur->host = value;
        } else if (key == "secret") {
            if (!all_digits(value))
                throw ParseError(file, lineno,
                                 "secret must be decimal digits, got '" + value + "'");
            cur->secret = value;
        } else if (key == "dtmfmode") {
            cur->dtmfmode = value;
        } else if (key == "insecure") {
            cur->insecure = value;
        } else if (key == "canreinvite") {
            cur->canreinvite = value;
        } else if (key == "nat") {
            cur->nat = value;
        } else if (key == "qualify") {
            cur->qualify = value;
        } else if (key == "mailbox") {
            cur->mailbox = parse_mailbox_ref(value, file, lineno);
        } else if (key == "context") {
            cur->context = value;
        } else {
            cur->extras.emplace_back(key, value);
        }
    }
    return peers;
}

DialplanDoc parse_extensions_conf(const std::string& text, const std::string& file) {
    DialplanDoc doc;
    ContextBlock* cur = nullptr;
    std::set<std::string> seen;

    for (const auto& [lineno, raw] : logical_lines(text)) {
        if (is_comment_or_blank(raw)) continue;
        if (auto name = section_header(raw, file, lineno)) {
            if (!seen.insert(*name).second)
                throw ParseError(file, lineno, "duplicate context '" + *name + "'");
            doc.contexts.push_back(ContextBlock{*name, {}});
            cur = &doc.contexts.back();
            continue;
        }
        std::string t = trim(raw);
        if (lower(t).rfind("exten", 0) != 0)
            throw ParseError(file, lineno, "expected context header or exten line");
        if (!cur) throw ParseError(file, lineno, "exten line outside any [context]");

        auto arrow = t.find("=>");
        if (arrow == std::string::npos)
            throw ParseError(file, lineno, "missing '=>' in exten line");
        if (trim(t.substr(0, arrow)) != "exten")
            throw ParseError(file, lineno, "exten line must start with 'exten =>'");
        std::string rest = trim(t.substr(arrow + 2));

        auto c1 = rest.find(',');
        if (c1 == std::string::npos)
            throw ParseError(file, lineno, "expected 'exten => E,P,Op(args)'");
        auto c2 = rest.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw ParseError(file, lineno, "expected 'exten => E,P,Op(args)'");

        ExtenLine el;
        el.line = lineno;
        el.exten = trim(rest.substr(0, c1));
        if (!all_digits(el.exten))
            throw ParseError(file, lineno, "extension must be decimal digits");

        std::string prio = trim(rest.substr(c1 + 1, c2 - c1 - 1));
        try {
            size_t used = 0;
            el.priority = std::stoi(prio, &used);
            if (used != prio.size()) throw std::invalid_argument(prio);
        } catch (const std::exception&) {
            throw ParseError(file, lineno, "priority must be an integer, got '" + prio + "'");
        }
        if (el.priority < 1) throw ParseError(file, lineno, "priority must be >= 1");

        std::string call = trim(rest.substr(c2 + 1));
        auto open = call.find('(');
        if (open == std::string::npos)
            throw ParseError(file, lineno, "operation must be Name(args)");
        el.op.name = trim(call.substr(0, open));
        if (el.op.name.empty()) throw ParseError(file, lineno, "missing operation name");

        // capture verbatim inside the outermost parentheses
        int depth = 0;
        std::size_t close = std::string::npos;
        for (std::size_t i = open; i < call.size(); ++i) {
            if (call[i] == '(') ++depth;
            if (call[i] == ')' && --depth == 0) {
                close = i;
                break;
            }
        }
        if (close == std::string::npos)
            throw ParseError(file, lineno, "unbalanced parentheses in operation call");
        el.op.args = call.substr(open + 1, close - open - 1);
        std::string tail = trim(call.substr(close + 1));
        if (!tail.empty() && tail[0] != ';' && tail[0] != '#')
            throw ParseError(file, lineno, "trailing text after operation call");

        cur->lines.push_back(std::move(el));
    }
    return doc;
}

VoicemailDoc parse_voicemail_conf(const std::string& text, const std::string& file) {
    VoicemailDoc doc;
    std::vector<MailboxEntry>* cur = nullptr;
    std::set<std::string> seen_ctx;

    for (const auto& [lineno, raw] : logical_lines(text)) {
        if (is_comment_or_blank(raw)) continue;
        if (auto name = section_header(raw, file, lineno)) {
            if (!seen_ctx.insert(*name).second)
                throw ParseError(file, lineno, "duplicate voicemail context '" + *name + "'");
            doc.contexts.emplace_back(*name, std::vector<MailboxEntry>{});
            cur = &doc.contexts.back().second;
            continue;
        }
        std::string t = trim(raw);
        auto arrow = t.find("=>");
        if (arrow == std::string::npos)
            throw ParseError(file, lineno, "expected 'box => pass, name, email'");
        if (!cur) throw ParseError(file, lineno, "mailbox entry outside any [context]");

        MailboxEntry e;
        e.box = trim(t.substr(0, arrow));
        if (!all_digits(e.box))
            throw ParseError(file, lineno, "mailbox must be decimal digits");

        std::string rest = t.substr(arrow + 2);
        std::vector<std::string> fields;
        std::stringstream ss(rest);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (fields.size() < 3)
            throw ParseError(file, lineno,
                             "mailbox entry needs password, name and email fields");
        if (fields.size() > 3)
            throw ParseError(file, lineno, "too many fields in mailbox entry");

        e.password = fields[0];
        if (!all_digits(e.password))
            throw ParseError(file, lineno, "mailbox password must be decimal digits");
        e.display_name = fields[1];
        e.email = fields[2];
        if (std::count(e.email.begin(), e.email.end(), '@') != 1)
            throw ParseError(file, lineno, "email must contain exactly one '@'");

        for (const auto& existing : *cur)
            if (existing.box == e.box)
                throw ParseError(file, lineno, "duplicate mailbox '" + e.box + "' in context");
        cur->push_back(std::move(e));
    }
    return doc;
}

std::pair<TunnelConfig, CredentialTable> parse_vpn_config(const std::string& pptpd_text,
                                                          const std::string& chap_text,
                                                          const std::string& pptpd_file,
                                                          const std::string& chap_file) {
    TunnelConfig cfg;
    bool have_local = false, have_pool = false;

    for (const auto& [lineno, raw] : logical_lines(pptpd_text)) {
        if (is_comment_or_blank(raw)) continue;
        std::stringstream ss(trim(raw));
        std::string key, value;
        ss >> key >> value;
        key = lower(key);
        if (key == "localip") {
            auto addr = Ipv4::parse(value);
            if (!addr) throw ParseError(pptpd_file, lineno, "bad localip address");
            cfg.localip = *addr;
            have_local = true;
        } else if (key == "remoteip") {
            auto dash = value.find('-');
            if (dash == std::string::npos)
                throw ParseError(pptpd_file, lineno, "remoteip must be 'first-last'");
            auto a = Ipv4::parse(value.substr(0, dash));
            auto b = Ipv4::parse(value.substr(dash + 1));
            if (!a || !b) throw ParseError(pptpd_file, lineno, "bad remoteip range");
            if (b->value < a->value)
                throw ParseError(pptpd_file, lineno, "empty remote pool (first > last)");
            cfg.pool_first = *a;
            cfg.pool_last = *b;
            have_pool = true;
        } else {
            throw ParseError(pptpd_file, lineno, "unknown directive '" + key + "'");
        }
    }
    if (!have_local) throw ParseError(pptpd_file, 1, "missing localip directive");
    if (!have_pool) throw ParseError(pptpd_file, 1, "missing remoteip directive");
    if (cfg.in_pool(cfg.localip))
        throw ParseError(pptpd_file, 1, "localip must not sit inside the remote pool");

    CredentialTable creds;
    std::set<std::string> seen;
    for (const auto& [lineno, raw] : logical_lines(chap_text)) {
        if (is_comment_or_blank(raw)) continue;
        std::stringstream ss(trim(raw));
        std::string user, service, secret, addr;
        ss >> user >> service >> secret >> addr;
        if (addr.empty())
            throw ParseError(chap_file, lineno, "expected 'user service secret addr' row");
        if (!seen.insert(user).second)
            throw ParseError(chap_file, lineno, "duplicate user '" + user + "'");
        creds.entries.push_back({user, secret});
    }
    return {cfg, creds};
}

ValidationReport validate_cross(const std::vector<PeerEntry>& peers,
                                const DialplanDoc& dialplan, const VoicemailDoc& mailboxes) {
    ValidationReport report;
    std::set<std::string> known_contexts;
    for (const auto& p : peers) known_contexts.insert(p.context);
    for (const auto& [ctx, boxes] : mailboxes.contexts) known_contexts.insert(ctx);

    for (const auto& c : dialplan.contexts) {
        if (!known_contexts.count(c.name))
            report.findings.push_back({Severity::Error, "extensions.conf", 0,
                                       "context " + c.name + " unmatched in sip.conf or "
                                       "voicemail.conf"});
        for (const auto& el : c.lines) {
            if (!is_known_operation(el.op.name))
                report.findings.push_back({Severity::Warning, "extensions.conf", el.line,
                                           "unknown operation '" + el.op.name + "'"});
            std::string n = el.op.name;
            std::transform(n.begin(), n.end(), n.begin(), ::tolower);
            if (n == "voicemailmain" && !el.op.args.empty()) {
                auto at = el.op.args.find('@');
                if (at == std::string::npos) {
                    report.findings.push_back({Severity::Error, "extensions.conf", el.line,
                                               "VoiceMailMain target must be box@context"});
                } else {
                    std::string box = trim(el.op.args.substr(0, at));
                    std::string ctx = trim(el.op.args.substr(at + 1));
                    if (!mailboxes.find_box(box, ctx))
                        report.findings.push_back(
                            {Severity::Error, "extensions.conf", el.line,
                             "VoiceMailMain target " + box + "@" + ctx + " not found in "
                             "voicemail.conf"});
                }
            }
        }
    }

    for (const auto& p : peers) {
        if (!p.mailbox) continue;
        if (!mailboxes.find_box(p.mailbox->box, p.mailbox->context))
            report.findings.push_back({Severity::Error, "sip.conf", 0,
                                       "peer " + p.name + " mailbox " + p.mailbox->box + "@" +
                                           p.mailbox->context + " not found in voicemail.conf"});
    }
    return report;
}

std::string serialize_sip_conf(const std::vector<PeerEntry>& peers) {
    std::ostringstream out;
    for (const auto& p : peers) {
        out << '[' << p.name << "]\n";
        switch (p.type) {
            case PeerType::Friend: out << "type=friend\n"; break;
            case PeerType::Peer: out << "type=peer\n"; break;
            case PeerType::User: out << "type=user\n"; break;
        }
        if (!p.username.empty()) out << "username=" << p.username << '\n';
        out << "host=" << p.host << '\n';
        if (!p.secret.empty()) out << "secret=" << p.secret << '\n';
        if (!p.dtmfmode.empty()) out << "dtmfmode=" << p.dtmfmode << '\n';
        if (!p.insecure.empty()) out << "insecure=" << p.insecure << '\n';
        if (!p.canreinvite.empty()) out << "canreinvite=" << p.canreinvite << '\n';
        if (!p.nat.empty()) out << "nat=" << p.nat << '\n';
        if (!p.qualify.empty()) out << "qualify=" << p.qualify << '\n';
        if (p.mailbox) out << "mailbox=" << p.mailbox->box << '@' << p.mailbox->context << '\n';
        if (!p.context.empty()) out << "context=" << p.context << '\n';
        for (const auto& [k, v] : p.extras) out << k << '=' << v << '\n';
        out << '\n';
    }
    return out.str();
}

std::string serialize_extensions_conf(const DialplanDoc& doc) {
    std::ostringstream out;
    for (const auto& c : doc.contexts) {
        out << '[' << c.name << "]\n";
        for (const auto& el : c.lines)
            out << "exten => " << el.exten << ", " << el.priority << ", " << el.op.name << '('
                << el.op.args << ")\n";
        out << '\n';
    }
    return out.str();
}

std::string serialize_voicemail_conf(const VoicemailDoc& doc) {
    std::ostringstream out;
    for (const auto& [ctx, boxes] : doc.contexts) {
        out << '[' << ctx << "]\n";
        for (const auto& e : boxes)
            out << e.box << " => " << e.password << ", " << e.display_name << ", " << e.email
                << '\n';
        out << '\n';
    }
    return out.str();
}

std::string serialize_pptpd_conf(const TunnelConfig& config) {
    std::ostringstream out;
    out << "localip " << config.localip.str() << '\n'
        << "remoteip " << config.pool_first.str() << '-' << config.pool_last.str() << '\n';
    return out.str();
}

std::string serialize_chap_secrets(const CredentialTable& creds) {
    std::ostringstream out;
    for (const auto& e : creds.entries) out << e.user << "\tpptpd\t" << e.secret << "\t*\n";
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace minipbx::confkit
