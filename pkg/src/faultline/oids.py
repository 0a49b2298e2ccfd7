"""Object identifiers used by the RPKI certificate and CMS profiles."""

# X.509 extensions
BASIC_CONSTRAINTS = "2.5.29.19"
SUBJECT_KEY_IDENTIFIER = "2.5.29.14"
AUTHORITY_KEY_IDENTIFIER = "2.5.29.35"
KEY_USAGE = "2.5.29.15"
CRL_DISTRIBUTION_POINTS = "2.5.29.31"
CERTIFICATE_POLICIES = "2.5.29.32"
CRL_NUMBER = "2.5.29.20"
SUBJECT_ALT_NAME = "2.5.29.17"
AUTHORITY_INFO_ACCESS = "1.3.6.1.5.5.7.1.1"
SUBJECT_INFO_ACCESS = "1.3.6.1.5.5.7.1.11"
IP_ADDR_BLOCKS = "1.3.6.1.5.5.7.1.7"
AS_IDENTIFIERS = "1.3.6.1.5.5.7.1.8"

# Certificate policy identifiers; V2 signals the reconsidered validation
# algorithm.
CP_IPADDR_ASNUMBER = "1.3.6.1.5.5.7.14.2"
CP_IPADDR_ASNUMBER_V2 = "1.3.6.1.5.5.7.14.3"
CPS_QUALIFIER = "1.3.6.1.5.5.7.2.1"
UNOTICE_QUALIFIER = "1.3.6.1.5.5.7.2.2"

# Access method OIDs (SIA / AIA)
AD_CA_ISSUERS = "1.3.6.1.5.5.7.48.2"
AD_CA_REPOSITORY = "1.3.6.1.5.5.7.48.5"
AD_RPKI_MANIFEST = "1.3.6.1.5.5.7.48.10"
AD_SIGNED_OBJECT = "1.3.6.1.5.5.7.48.11"
AD_RPKI_NOTIFY = "1.3.6.1.5.5.7.48.13"

# Distinguished name attributes
AT_COMMON_NAME = "2.5.4.3"
AT_SERIAL_NUMBER = "2.5.4.5"
AT_ORGANIZATION_NAME = "2.5.4.10"

# Algorithms
RSA_ENCRYPTION = "1.2.840.113549.1.1.1"
SHA256_WITH_RSA = "1.2.840.113549.1.1.11"
EC_PUBLIC_KEY = "1.2.840.10045.2.1"
EC_P256 = "1.2.840.10045.3.1.7"
ECDSA_WITH_SHA256 = "1.2.840.10045.4.3.2"
SHA256 = "2.16.840.1.101.3.4.2.1"

# CMS
CMS_SIGNED_DATA = "1.2.840.113549.1.7.2"
CMS_ATTR_CONTENT_TYPE = "1.2.840.113549.1.9.3"
CMS_ATTR_MESSAGE_DIGEST = "1.2.840.113549.1.9.4"
CT_ROA = "1.2.840.113549.1.9.16.1.24"
CT_MANIFEST = "1.2.840.113549.1.9.16.1.26"
CT_GHOSTBUSTERS = "1.2.840.113549.1.9.16.1.35"

# Extensions an RPKI resource certificate may legitimately carry.
RPKI_CERT_EXTENSIONS = frozenset({
    BASIC_CONSTRAINTS,
    SUBJECT_KEY_IDENTIFIER,
    AUTHORITY_KEY_IDENTIFIER,
    KEY_USAGE,
    CRL_DISTRIBUTION_POINTS,
    CERTIFICATE_POLICIES,
    AUTHORITY_INFO_ACCESS,
    SUBJECT_INFO_ACCESS,
    IP_ADDR_BLOCKS,
    AS_IDENTIFIERS,
})
