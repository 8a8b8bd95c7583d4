#include "minipbx/ivrvm.hpp"

#include <sstream>

#include "minipbx/digest.hpp"

namespace minipbx::ivrvm {

const char* ivr_phase_name(IvrPhase p) {
    switch (p) {
        case IvrPhase::Welcome: return "welcome";
        case IvrPhase::AskId: return "ask-id";
        case IvrPhase::ReadId: return "read-id";
        case IvrPhase::AskPw: return "ask-pw";
        case IvrPhase::ReadPw: return "read-pw";
        case IvrPhase::Verify: return "verify";
        case IvrPhase::Fetch: return "fetch";
        case IvrPhase::Speak: return "speak";
        case IvrPhase::AgainQ: return "again?";
        case IvrPhase::BadPw: return "bad-pw";
        case IvrPhase::Done: return "done";
    }
    return "?";
}

namespace {

using dialplan::Action;
using dialplan::Hangup;
using dialplan::Play;
using dialplan::Query;
using dialplan::Read;
using dialplan::SayDigits;

std::vector<Action> ask_id_actions() {
    return {Read{"student-id", prompts::kEnterId}};
}

}  // namespace

std::pair<std::vector<Action>, IvrSession> run_ivr(const IvrSession& session,
                                                   const IvrEvent& event) {
    IvrSession next = session;
    std::vector<Action> actions;

    if (event.kind == IvrEvent::Kind::Timeout) {
        next.phase = IvrPhase::Done;
        actions.push_back(Hangup{});
        return {actions, next};
    }

    switch (session.phase) {
        case IvrPhase::Welcome:
            if (event.kind != IvrEvent::Kind::Start)
                throw IvrError("expected start event in welcome phase");
            actions.push_back(Play{prompts::kWelcome});
            for (auto& a : ask_id_actions()) actions.push_back(a);
            next.phase = IvrPhase::ReadId;
            break;

        case IvrPhase::AskId:
        case IvrPhase::ReadId:
            if (event.kind != IvrEvent::Kind::Digits)
                throw IvrError("expected digits while reading the student id");
            next.entered_id = event.digits;
            actions.push_back(Read{"student-pw", prompts::kEnterPassword});
            next.phase = IvrPhase::ReadPw;
            break;

        case IvrPhase::AskPw:
        case IvrPhase::ReadPw:
            if (event.kind != IvrEvent::Kind::Digits)
                throw IvrError("expected digits while reading the password");
            next.entered_pw = event.digits;
            actions.push_back(Query{"attendance"});
            next.phase = IvrPhase::Verify;
            break;

        case IvrPhase::Verify:
        case IvrPhase::Fetch:
            if (event.kind == IvrEvent::Kind::QueryOk) {
                next.retries = 0;
                actions.push_back(Play{prompts::kAttendanceIs});
                actions.push_back(SayDigits{std::to_string(event.value)});
                actions.push_back(Read{"again", prompts::kAnotherStudent});
                next.phase = IvrPhase::AgainQ;
            } else if (event.kind == IvrEvent::Kind::QueryFail) {
                ++next.retries;
                actions.push_back(Play{prompts::kBadPassword});
                if (next.retries >= next.retry_cap) {
                    actions.push_back(Hangup{});
                    next.phase = IvrPhase::Done;
                } else {
                    for (auto& a : ask_id_actions()) actions.push_back(a);
                    next.phase = IvrPhase::ReadId;
                }
            } else if (event.kind == IvrEvent::Kind::ServiceError) {
                actions.push_back(Play{prompts::kServiceUnavailable});
                actions.push_back(Hangup{});
                next.phase = IvrPhase::Done;
            } else {
                throw IvrError("expected a query result in verify phase");
            }
            break;

        case IvrPhase::Speak:
        case IvrPhase::AgainQ:
            if (event.kind != IvrEvent::Kind::Digits)
                throw IvrError("expected a menu digit after the readout");
            if (!event.digits.empty() && event.digits[0] == kMenuAgainYes) {
                for (auto& a : ask_id_actions()) actions.push_back(a);
                next.phase = IvrPhase::ReadId;
            } else if (!event.digits.empty() && event.digits[0] == kMenuAgainNo) {
                actions.push_back(Hangup{});
                next.phase = IvrPhase::Done;
            } else {
                actions.push_back(Read{"again", prompts::kAnotherStudent});
            }
            break;

        case IvrPhase::BadPw:
        case IvrPhase::Done:
            actions.push_back(Hangup{});
            next.phase = IvrPhase::Done;
            break;
    }
    return {actions, next};
}

StoreGateway make_acl_gateway(const acl::Principal& principal,
                              const acl::AttendanceStore& store,
                              const acl::GrantTable& grants, const acl::ObjectScope& object) {
    StoreGateway gw;
    // grants and store are referenced live so runtime REVOKEs take effect
    gw.lookup = [principal, &store, &grants, object](const std::string& id)
        -> StoreGateway::LookupResult {
        if (!grants.check(principal, acl::Privilege::Select, object))
            return StoreGateway::Error::Unavailable;
        const acl::StudentRecord* rec = store.find(id);
        if (!rec) return std::monostate{};
        return *rec;
    };
    return gw;
}

std::variant<bool, AuthError> authenticate(const std::string& entered_id,
                                           const std::string& entered_pw,
                                           const StoreGateway& gateway) {
    auto result = gateway.lookup(entered_id);
    if (std::holds_alternative<StoreGateway::Error>(result))
        return AuthError::ServiceUnavailable;
    if (std::holds_alternative<std::monostate>(result)) return false;
    const auto& rec = std::get<acl::StudentRecord>(result);
    return rec.id == entered_id && rec.password_digest == md5_hex(entered_pw);
}

VoicemailStore::VoicemailStore(confkit::VoicemailDoc doc) : doc_(std::move(doc)) {}

const confkit::MailboxEntry* VoicemailStore::mailbox(const std::string& box,
                                                     const std::string& context) const {
    return doc_.find_box(box, context);
}

std::variant<DepositReceipt, VmError> VoicemailStore::deposit(
    const std::string& box, const std::string& context, const std::string& from_peer,
    const std::string& payload_ref, VTime now, notify::Sink& notifier) {
    const confkit::MailboxEntry* entry = mailbox(box, context);
    if (!entry) return VmError::UnknownBox;

    auto& msgs = messages_[{box, context}];
    msgs.push_back({from_peer, now, payload_ref});
    journal_.push_back({now, box, context, from_peer, payload_ref});

    notify::Notification n;
    n.to = entry->email;
    n.at = now;
    n.category = notify::Category::VoicemailNotice;
    n.subject = "voicemail from " + from_peer + " in box " + box;
    n.body = "caller: " + from_peer + "\nbox: " + box + "@" + context +
             "\nmessage: " + payload_ref + "\n";
    notifier.send(std::move(n));

    return DepositReceipt{box, context, msgs.size() - 1};
}

std::variant<std::vector<VmMessage>, VmError> VoicemailStore::retrieve(
    const std::string& box, const std::string& context, const std::string& password) const {
    const confkit::MailboxEntry* entry = mailbox(box, context);
    if (!entry) return VmError::UnknownBox;
    if (entry->password != password) return VmError::WrongPassword;
    auto it = messages_.find({box, context});
    if (it == messages_.end()) return std::vector<VmMessage>{};
    return it->second;
}

std::size_t VoicemailStore::message_count(const std::string& box,
                                          const std::string& context) const {
    auto it = messages_.find({box, context});
    return it == messages_.end() ? 0 : it->second.size();
}

std::string VoicemailStore::journal() const {
    std::ostringstream out;
    for (const auto& l : journal_)
        out << iso8601(l.at) << '\t' << l.box << '@' << l.context << '\t' << l.from << '\t'
            << l.payload_ref << '\n';
    return out.str();
}

}  // namespace minipbx::ivrvm
