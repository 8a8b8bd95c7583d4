#ifndef MINIPBX_CONFKIT_HPP
#define MINIPBX_CONFKIT_HPP

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "minipbx/net.hpp"

namespace minipbx::confkit {

// Thrown by all five dialect parsers. `line` is 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, int line, const std::string& message)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

enum class PeerType { Friend, Peer, User };

struct MailboxRef {
    std::string box;      // decimal digits
    std::string context;

    bool operator==(const MailboxRef&) const = default;
};

// One [section] of sip.conf. Keys the registrar does not act on are kept in
// `extras` so corpora with additional Asterisk options still load.
struct PeerEntry {
    std::string name;
    PeerType type = PeerType::Friend;
    std::string username;
    std::string host = "dynamic";
    std::string secret;           // decimal digits only
    std::string dtmfmode;
    std::string insecure;
    std::string canreinvite;
    std::string nat;
    std::string qualify;
    std::optional<MailboxRef> mailbox;
    std::string context;
    std::vector<std::pair<std::string, std::string>> extras;
};

struct OperationCall {
    std::string name;
    std::string args;  // verbatim text inside the outermost parentheses

    bool operator==(const OperationCall&) const = default;
};

struct ExtenLine {
    std::string exten;  // decimal digits
    int priority = 1;
    OperationCall op;
    int line = 0;  // source line, for diagnostics

    bool operator==(const ExtenLine& o) const {
        return exten == o.exten && priority == o.priority && op == o.op;
    }
};

struct ContextBlock {
    std::string name;
    std::vector<ExtenLine> lines;

    bool operator==(const ContextBlock&) const = default;
};

struct DialplanDoc {
    std::vector<ContextBlock> contexts;  // file order

    const ContextBlock* find(const std::string& name) const;
    bool operator==(const DialplanDoc&) const = default;
};

struct MailboxEntry {
    std::string box;       // decimal digits
    std::string password;  // decimal digits
    std::string display_name;
    std::string email;     // exactly one '@'

    bool operator==(const MailboxEntry&) const = default;
};

struct VoicemailDoc {
    std::vector<std::pair<std::string, std::vector<MailboxEntry>>> contexts;  // file order

    const std::vector<MailboxEntry>* find_context(const std::string& name) const;
    const MailboxEntry* find_box(const std::string& box, const std::string& context) const;
    bool operator==(const VoicemailDoc&) const = default;
};

struct TunnelConfig {
    Ipv4 localip;
    Ipv4 pool_first;
    Ipv4 pool_last;  // inclusive

    std::uint32_t pool_size() const { return pool_last.value - pool_first.value + 1; }
    bool in_pool(Ipv4 a) const { return a >= pool_first && a <= pool_last; }
};

struct Credential {
    std::string user;
    std::string secret;
};

struct CredentialTable {
    std::vector<Credential> entries;

    const Credential* find(const std::string& user) const;
};

enum class Severity { Error, Warning };

struct Finding {
    Severity severity;
    std::string file;
    int line = 0;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const;
    std::vector<const Finding*> errors() const;
};

// Operation names the dial-plan interpreter understands. Anything else is a
// validator warning, not a parse error.
bool is_known_operation(const std::string& name);

std::vector<PeerEntry> parse_sip_conf(const std::string& text,
                                      const std::string& file = "sip.conf");
DialplanDoc parse_extensions_conf(const std::string& text,
                                  const std::string& file = "extensions.conf");
VoicemailDoc parse_voicemail_conf(const std::string& text,
                                  const std::string& file = "voicemail.conf");
std::pair<TunnelConfig, CredentialTable> parse_vpn_config(
    const std::string& pptpd_text, const std::string& chap_text,
    const std::string& pptpd_file = "pptpd.conf",
    const std::string& chap_file = "chap-secrets");

ValidationReport validate_cross(const std::vector<PeerEntry>& peers,
                                const DialplanDoc& dialplan,
                                const VoicemailDoc& mailboxes);

// Round-trip serializers; serialize(parse(text)) reparses structurally equal.
std::string serialize_sip_conf(const std::vector<PeerEntry>& peers);
std::string serialize_extensions_conf(const DialplanDoc& doc);
std::string serialize_voicemail_conf(const VoicemailDoc& doc);
std::string serialize_pptpd_conf(const TunnelConfig& config);
std::string serialize_chap_secrets(const CredentialTable& creds);

std::string read_file(const std::string& path);  // throws std::runtime_error

}  // namespace minipbx::confkit

#endif
