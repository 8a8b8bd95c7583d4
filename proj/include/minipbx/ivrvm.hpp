#ifndef MINIPBX_IVRVM_HPP
#define MINIPBX_IVRVM_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "minipbx/acl.hpp"
#include "minipbx/confkit.hpp"
#include "minipbx/dialplan.hpp"
#include "minipbx/notify.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::ivrvm {

// Symbolic audio prompt tokens; no audio files exist.
namespace prompts {
inline constexpr const char* kWelcome = "welcome";
inline constexpr const char* kEnterId = "enter-id";
inline constexpr const char* kEnterPassword = "enter-password";
inline constexpr const char* kAttendanceIs = "attendance-is";
inline constexpr const char* kBadPassword = "bad-password";
inline constexpr const char* kAnotherStudent = "another-student";
inline constexpr const char* kServiceUnavailable = "service-unavailable";
inline constexpr const char* kVmPassword = "vm-password";
inline constexpr const char* kVmYouHave = "vm-youhave";
inline constexpr const char* kVmBadPassword = "vm-bad-password";
}  // namespace prompts

inline constexpr int kDefaultRetryCap = 3;
inline constexpr char kMenuAgainYes = '1';
inline constexpr char kMenuAgainNo = '2';

enum class IvrPhase {
    Welcome,
    AskId,
    ReadId,
    AskPw,
    ReadPw,
    Verify,
    Fetch,
    Speak,
    AgainQ,
    BadPw,
    Done,
};

const char* ivr_phase_name(IvrPhase p);

struct IvrSession {
    IvrPhase phase = IvrPhase::Welcome;
    std::string entered_id;
    std::string entered_pw;
    int retries = 0;
    int retry_cap = kDefaultRetryCap;
};

struct IvrEvent {
    enum class Kind { Start, Digits, QueryOk, QueryFail, ServiceError, Timeout };
    Kind kind = Kind::Start;
    std::string digits;  // for Digits
    int value = 0;       // for QueryOk
};

class IvrError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The attendance flow as a pure transition function: same (session, event)
// always yields the same (actions, session'). The dial plan routes a call
// here through its MYSQL() line; the engine feeds completions back in.
std::pair<std::vector<dialplan::Action>, IvrSession> run_ivr(const IvrSession& session,
                                                             const IvrEvent& event);

// --- Store gateway -------------------------------------------------------

// Read access to the student table, every call passing the acl SELECT gate.
struct StoreGateway {
    enum class Error { Unavailable };
    using LookupResult = std::variant<acl::StudentRecord, Error, std::monostate>;
    // monostate = no such student
    std::function<LookupResult(const std::string& id)> lookup;
};

StoreGateway make_acl_gateway(const acl::Principal& principal, const acl::AttendanceStore& store,
                              const acl::GrantTable& grants, const acl::ObjectScope& object);

enum class AuthError { ServiceUnavailable };

// True iff a student record matches id and password exactly (full-string
// compare on the md5 of the entered password).
std::variant<bool, AuthError> authenticate(const std::string& entered_id,
                                           const std::string& entered_pw,
                                           const StoreGateway& gateway);

// --- Voicemail -----------------------------------------------------------

struct VmMessage {
    std::string from_peer;
    VTime deposited_at = 0;
    std::string payload_ref;
};

struct DepositReceipt {
    std::string box;
    std::string context;
    std::size_t message_index = 0;
};

enum class VmError { UnknownBox, WrongPassword };

class VoicemailStore {
public:
    explicit VoicemailStore(confkit::VoicemailDoc doc);

    // Appends the message and notifies the owner's email address.
    std::variant<DepositReceipt, VmError> deposit(const std::string& box,
                                                  const std::string& context,
                                                  const std::string& from_peer,
                                                  const std::string& payload_ref, VTime now,
                                                  notify::Sink& notifier);

    std::variant<std::vector<VmMessage>, VmError> retrieve(const std::string& box,
                                                           const std::string& context,
                                                           const std::string& password) const;

    const confkit::MailboxEntry* mailbox(const std::string& box,
                                         const std::string& context) const;
    std::size_t message_count(const std::string& box, const std::string& context) const;
    std::size_t total_deposits() const { return journal_.size(); }

    // One line per deposit: ISO-8601 virtual timestamp, box, from, payload.
    std::string journal() const;

private:
    struct JournalLine {
        VTime at;
        std::string box;
        std::string context;
        std::string from;
        std::string payload_ref;
    };

    confkit::VoicemailDoc doc_;
    std::map<std::pair<std::string, std::string>, std::vector<VmMessage>> messages_;
    std::vector<JournalLine> journal_;
};

}  // namespace minipbx::ivrvm

#endif
