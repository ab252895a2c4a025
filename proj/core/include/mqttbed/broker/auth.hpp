#pragma once

#include <optional>
#include <string_view>

#include "mqttbed/broker/policy.hpp"
#include "mqttbed/wire/packet.hpp"

namespace mqttbed::broker {

enum class AuthResult { Accepted, BadCredentials, NotAuthorized };

/// Checks CONNECT credentials against the policy. Unknown users are verified
/// against a fixed dummy verifier so both failure paths do the same work.
class Authenticator {
public:
    explicit Authenticator(const SecurityPolicy& policy);

    AuthResult check(const std::optional<wire::Credentials>& credentials) const;

private:
    const SecurityPolicy& policy_;
    PasswordVerifier dummy_;
};

}  // namespace mqttbed::broker
