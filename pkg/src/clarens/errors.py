"""Exception hierarchy shared by all clarens modules."""


class ClarensError(Exception):
    """Base class for all errors raised by this package."""


# --- ternary tree ---

class EmptyString(ClarensError):
    """An empty string cannot be stored in the tree."""


# --- distinguished names ---

class MalformedDn(ClarensError):
    """String is not a slash-form distinguished name."""


# --- virtual organization ---

class EmptyAdmins(ClarensError):
    """A server without any administrator DNs is unmanageable."""


class NotAuthorized(ClarensError):
    """Actor lacks the administrative rights for this operation."""


class DuplicateGroup(ClarensError):
    pass


class MissingParent(ClarensError):
    pass


class NoSuchGroup(ClarensError):
    pass


class ProtectedGroup(ClarensError):
    """The admins group cannot be deleted."""


# --- ACLs ---

class MalformedMethodName(ClarensError):
    pass


class DenyListForbidden(ClarensError):
    """User-mapping ACLs may not carry deny entries."""


# --- authentication ---

class NoPeerCertificate(ClarensError):
    pass


class BadCookieProtocol(ClarensError):
    """First-call cookies did not follow the clarens_password=BROWSER protocol."""


class ChainVerifyFailed(ClarensError):
    pass


class ExpiredCertificate(ClarensError):
    pass


class MalformedCertificate(ClarensError):
    pass


class OversizedClientId(ClarensError):
    """Client session id too long for one asymmetric block."""


# --- RPC ---

class RpcError(ClarensError):
    """RPC-layer error carrying the wire fault code."""

    fault_code = 4

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message


class ParseError(RpcError):
    fault_code = 1


class NoSuchMethod(RpcError):
    fault_code = 2


class ProtocolError(RpcError):
    fault_code = 5


class DuplicateMethod(ClarensError):
    pass


class BadPrefix(ClarensError):
    pass


# --- persistence ---

class StorageFailure(ClarensError):
    pass


class CorruptRecord(ClarensError):
    pass
