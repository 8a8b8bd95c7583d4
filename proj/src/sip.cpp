#include "minipbx/sip.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "minipbx/digest.hpp"

namespace minipbx::sip {

namespace {

struct NamedMethod {
    const char* name;
    Method method;
};
const NamedMethod kMethods[] = {
    {"REGISTER", Method::Register}, {"INVITE", Method::Invite},
    {"ACK", Method::Ack},           {"BYE", Method::Bye},
    {"OPTIONS", Method::Options},   {"SUBSCRIBE", Method::Subscribe},
    {"NOTIFY", Method::Notify},
};

bool iequals(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower((unsigned char)a[i]) != std::tolower((unsigned char)b[i]))
            return false;
    return true;
}

}  // namespace

const char* method_name(Method m) {
    for (const auto& e : kMethods)
        if (e.method == m) return e.name;
    return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
    for (const auto& e : kMethods)
        if (name == e.name) return e.method;
    return std::nullopt;
}

const char* reason_for(int code) {
    switch (code) {
        case 200: return "OK";
        case 401: return "Unauthorized";
        case 403: return "Forbidden";
        case 404: return "Not Found";
    }
    return nullptr;
}

std::string SipUri::str() const {
    std::string s = "sip:" + user + "@" + host;
    if (port) s += ":" + std::to_string(*port);
    return s;
}

SipMessage SipMessage::request(Method m, SipUri uri) {
    SipMessage msg;
    msg.kind = Kind::Request;
    msg.method = m;
    msg.uri = std::move(uri);
    return msg;
}

SipMessage SipMessage::status(int code) {
    SipMessage msg;
    msg.kind = Kind::Status;
    msg.code = code;
    const char* reason = reason_for(code);
    msg.reason = reason ? reason : "Unknown";
    return msg;
}

std::optional<std::string> SipMessage::header(const std::string& name) const {
    for (const auto& [k, v] : headers)
        if (iequals(k, name)) return v;
    return std::nullopt;
}

SipMessage& SipMessage::with_header(std::string name, std::string value) {
    headers.emplace_back(std::move(name), std::move(value));
    return *this;
}

std::string encode(const SipMessage& m) {
    std::ostringstream out;
    if (m.kind == SipMessage::Kind::Request)
        out << method_name(m.method) << ' ' << m.uri.str() << " SIP/2.0\r\n";
    else
        out << "SIP/2.0 " << m.code << ' ' << m.reason << "\r\n";
    for (const auto& [k, v] : m.headers) out << k << ": " << v << "\r\n";
    out << "\r\n";
    out << m.body;
    return out.str();
}

namespace {

SipUri parse_uri(const std::string& text) {
    if (text.rfind("sip:", 0) != 0) throw CodecError("URI must start with sip:, got " + text);
    std::string rest = text.substr(4);
    auto at = rest.find('@');
    if (at == std::string::npos || at == 0) throw CodecError("URI missing user@host");
    SipUri uri;
    uri.user = rest.substr(0, at);
    std::string hostport = rest.substr(at + 1);
    auto colon = hostport.find(':');
    if (colon == std::string::npos) {
        uri.host = hostport;
    } else {
        uri.host = hostport.substr(0, colon);
        std::string p = hostport.substr(colon + 1);
        try {
            std::size_t used = 0;
            int port = std::stoi(p, &used);
            if (used != p.size() || port <= 0 || port > 65535)
                throw std::invalid_argument(p);
            uri.port = std::uint16_t(port);
        } catch (const std::exception&) {
            throw CodecError("bad URI port '" + p + "'");
        }
    }
    if (uri.host.empty()) throw CodecError("URI missing host");
    return uri;
}

}  // namespace

SipMessage decode(const std::string& bytes) {
    // split into CRLF lines up to the blank line; remainder is the body
    std::vector<std::string> lines;
    std::size_t pos = 0;
    std::string body;
    bool saw_blank = false;
    while (pos <= bytes.size()) {
        auto eol = bytes.find("\r\n", pos);
        if (eol == std::string::npos) {
            if (pos < bytes.size()) lines.push_back(bytes.substr(pos));
            break;
        }
        std::string line = bytes.substr(pos, eol - pos);
        pos = eol + 2;
        if (line.empty()) {
            saw_blank = true;
            body = bytes.substr(pos);
            break;
        }
        lines.push_back(std::move(line));
    }
    if (lines.empty()) throw CodecError("empty message");
    if (!saw_blank) throw CodecError("missing blank line after headers");

    SipMessage m;
    const std::string& start = lines[0];
    if (start.rfind("SIP/2.0 ", 0) == 0) {
        m.kind = SipMessage::Kind::Status;
        std::string rest = start.substr(8);
        auto sp = rest.find(' ');
        if (sp == std::string::npos) throw CodecError("status line missing reason");
        try {
            m.code = std::stoi(rest.substr(0, sp));
        } catch (const std::exception&) {
            throw CodecError("bad status code");
        }
        if (!reason_for(m.code)) throw CodecError("unknown status code " + rest.substr(0, sp));
        m.reason = rest.substr(sp + 1);
    } else {
        auto sp1 = start.find(' ');
        auto sp2 = start.rfind(' ');
        if (sp1 == std::string::npos || sp2 == sp1)
            throw CodecError("malformed start line: " + start);
        if (start.substr(sp2 + 1) != "SIP/2.0")
            throw CodecError("request line must end with SIP/2.0");
        auto method = method_from_name(start.substr(0, sp1));
        if (!method) throw CodecError("unknown method '" + start.substr(0, sp1) + "'");
        m.kind = SipMessage::Kind::Request;
        m.method = *method;
        m.uri = parse_uri(start.substr(sp1 + 1, sp2 - sp1 - 1));
    }

    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto colon = lines[i].find(':');
        if (colon == std::string::npos) throw CodecError("malformed header: " + lines[i]);
        std::string name = lines[i].substr(0, colon);
        std::string value = lines[i].substr(colon + 1);
        while (!value.empty() && value.front() == ' ') value.erase(value.begin());
        m.headers.emplace_back(std::move(name), std::move(value));
    }

    // From/To/CSeq/Call-ID may appear at most once.
    for (const char* unique : {"From", "To", "CSeq", "Call-ID"}) {
        int n = 0;
        for (const auto& [k, v] : m.headers)
            if (iequals(k, unique)) ++n;
        if (n > 1) throw CodecError(std::string("duplicate ") + unique + " header");
    }

    m.body = std::move(body);
    return m;
}

std::string compute_digest(const std::string& user, const std::string& secret,
                           const std::string& nonce) {
    return md5_hex(user + ":" + secret + ":" + nonce);
}

std::string make_authorization(const std::string& user, const std::string& nonce,
                               const std::string& response) {
    return "Digest user=" + user + ",nonce=" + nonce + ",response=" + response;
}

std::optional<Authorization> parse_authorization(const std::string& value) {
    std::string v = value;
    if (v.rfind("Digest ", 0) == 0) v = v.substr(7);
    Authorization auth;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) return std::nullopt;
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        if (key == "user")
            auth.user = val;
        else if (key == "nonce")
            auth.nonce = val;
        else if (key == "response")
            auth.response = val;
    }
    if (auth.user.empty() || auth.nonce.empty() || auth.response.empty())
        return std::nullopt;
    return auth;
}

}  // namespace minipbx::sip
