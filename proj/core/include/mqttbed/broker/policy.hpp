#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mqttbed::broker {

/// nullopt is the anonymous principal.
using Principal = std::optional<std::string>;

std::string principal_label(const Principal& p);

struct AclEntry {
    Principal principal;
    std::string filter;
    bool allow_publish = false;
    bool allow_subscribe = false;
};

struct BanPolicy {
    std::uint32_t max_failures = 5;
    std::chrono::seconds window{60};
    std::chrono::seconds ban_duration{300};
};

struct PasswordPolicy {
    std::size_t min_length = 8;
    int require_classes = 3;
};

/// Salted PBKDF2-HMAC-SHA256 digest of a password.
class PasswordVerifier {
public:
    static constexpr int kIterations = 101;
    using Salt = std::array<std::uint8_t, 16>;
    using Digest = std::array<std::uint8_t, 32>;

    static PasswordVerifier from_password(std::string_view password);
    static PasswordVerifier from_password(std::string_view password, const Salt& salt);

    /// Constant time with respect to the stored digest.
    bool matches(std::string_view password) const;

    const Salt& salt() const { return salt_; }
    const Digest& digest() const { return digest_; }

private:
    PasswordVerifier(const Salt& s, const Digest& d) : salt_(s), digest_(d) {}
    Salt salt_{};
    Digest digest_{};
};

class PolicyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PasswordViolation { TooShort, TooFewClasses };

std::string_view violation_name(PasswordViolation v);

/// Character classes: lowercase, uppercase, digit, other.
int character_classes(std::string_view password);

std::vector<PasswordViolation> validate_password_policy(std::string_view password,
                                                        const PasswordPolicy& policy);

struct SecurityPolicy {
    bool allow_anonymous = true;
    std::map<std::string, PasswordVerifier, std::less<>> credentials;
    bool enforce_acl = false;
    std::vector<AclEntry> acl;
    std::size_t max_packet_size = 0;      // 0 = unlimited
    std::size_t message_size_limit = 0;   // 0 = unlimited
    std::size_t max_inflight_bytes = 0;   // 0 = unlimited
    std::optional<BanPolicy> ban_policy;
    std::optional<PasswordPolicy> password_policy;

    /// Provisions a user, enforcing the password policy when one is set.
    /// Throws PolicyError listing every violation.
    void add_user(const std::string& username, std::string_view password);

    /// Throws PolicyError if the posture is inconsistent.
    void validate() const;
};

}  // namespace mqttbed::broker
