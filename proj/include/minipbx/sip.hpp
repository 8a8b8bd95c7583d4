#ifndef MINIPBX_SIP_HPP
#define MINIPBX_SIP_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace minipbx::sip {

enum class Method { Register, Invite, Ack, Bye, Options, Subscribe, Notify };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

// The status subset the server speaks.
const char* reason_for(int code);  // 200/401/403/404, nullptr otherwise

struct SipUri {
    std::string user;
    std::string host;
    std::optional<std::uint16_t> port;

    bool operator==(const SipUri&) const = default;
    std::string str() const;
};

class CodecError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Request or status message of the SIP text subset. Requests carry a method
// and URI, statuses a code and reason; never both.
struct SipMessage {
    enum class Kind { Request, Status };

    Kind kind = Kind::Request;
    Method method = Method::Register;
    SipUri uri;
    int code = 0;
    std::string reason;
    std::vector<std::pair<std::string, std::string>> headers;  // wire order
    std::string body;

    static SipMessage request(Method m, SipUri uri);
    static SipMessage status(int code);

    // Case-insensitive lookup of the first matching header.
    std::optional<std::string> header(const std::string& name) const;
    SipMessage& with_header(std::string name, std::string value);

    bool operator==(const SipMessage&) const = default;
};

// CRLF-line wire form; decode(encode(m)) == m for every valid message.
std::string encode(const SipMessage& m);
SipMessage decode(const std::string& bytes);

// Lowercase hex MD5 over "user:secret:nonce"; the single-round digest both
// the registrar and clients compute.
std::string compute_digest(const std::string& user, const std::string& secret,
                           const std::string& nonce);

// Authorization header value carrying the digest response.
std::string make_authorization(const std::string& user, const std::string& nonce,
                               const std::string& response);
struct Authorization {
    std::string user;
    std::string nonce;
    std::string response;
};
std::optional<Authorization> parse_authorization(const std::string& value);

}  // namespace minipbx::sip

#endif
