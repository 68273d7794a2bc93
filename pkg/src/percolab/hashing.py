"""Integer mixing primitives shared by the reference explorer and the compiled kernel.

Every vertex of the (infinite) working graph gets a two-lane 64-bit
fingerprint computed structurally from its canonical coordinates, and every
edge gets a fingerprint from its canonical endpoint.  Edge status is then a
keyed hash of ``(seed, replica, edge fingerprint)``, so it never depends on
the order in which an exploration meets the edge.

The functions here operate on plain Python ints masked to 64 bits.  The
compiled kernel in :mod:`percolab._kernel` re-implements them on ``uint64``;
``tests/test_hashing.py`` checks the two agree bit for bit.
"""

MASK64 = (1 << 64) - 1

MIX_M1 = 0xBF58476D1CE4E5B9
MIX_M2 = 0x94D049BB133111EB

GOLD_A = 0x9E3779B97F4A7C15
GOLD_B = 0xC2B2AE3D27D4EB4F
ANC_A = 0x243F6A8885A308D3
ANC_B = 0x13198A2E03707344
FOLD_A = 0xA4093822299F31D0
FOLD_B = 0x082EFA98EC4E6C89
FOLD_B2 = 0x452821E638D01377
ZOB_A = 0xBE5466CF34E90C6C
ZOB_B = 0xC0AC29B7C97C50DD
FIB_X = 0x3F84D5B5B5470917
FIB_Y = 0x9216D5D98979FB1B
FIB_XB = 0xD1310BA698DFB5AC
FIB_YB = 0x2FFD72DBD01ADFB7
EDGE_A = 0xB8E1AFED6A267E96
EDGE_B = 0xBA7C9045F12C7F99
SEED_K = 0x24A19947B3916CF7
REP_K = 0x0801F2E2858EFC16

INV_2_53 = 1.0 / (1 << 53)

# edge kinds; the lattice kinds are LATTICE + axis
KIND_TREE = 1
KIND_LATTICE = 2
KIND_FLIP = 4


def mix64(z):
    z &= MASK64
    z ^= z >> 30
    z = (z * MIX_M1) & MASK64
    z ^= z >> 27
    z = (z * MIX_M2) & MASK64
    return z ^ (z >> 31)


def ancestor_fp(up):
    """Fingerprint of the vertex ``up`` steps towards the fixed end from the origin."""
    return mix64(up * GOLD_A + ANC_A), mix64(up * GOLD_B + ANC_B)


def fold_fp(fa, fb, digit):
    """Fingerprint of child ``digit`` of a vertex with fingerprint ``(fa, fb)``."""
    return (mix64(fa + (digit + 1) * FOLD_A),
            mix64((fb ^ (((digit + 1) * FOLD_B) & MASK64)) + FOLD_B2))


def zobrist(fa, fb):
    """Per-vertex lamp key; a lamp set's key is the XOR over its lit lamps."""
    return mix64(fa ^ ZOB_A), mix64(fb ^ ZOB_B)


def lattice_key(x, y):
    ux = x & MASK64
    uy = y & MASK64
    return (mix64(mix64(ux + FIB_X) + uy * FIB_Y),
            mix64(mix64(uy + FIB_YB) + ux * FIB_XB))


def site_fp(fa, fb, ka, kb):
    """Combine a tree fingerprint with a fiber key."""
    return mix64(fa ^ ka), mix64(fb + kb)


def edge_fp(kind, sa, sb):
    return mix64(sa + kind * EDGE_A), mix64(sb ^ ((kind * EDGE_B) & MASK64))


def seed_key(seed):
    return mix64((seed & MASK64) ^ SEED_K)


def replica_key(replica):
    return mix64(replica * GOLD_A + REP_K)


def uniform_from_keys(ea, eb, skey, rkey):
    x = mix64(ea ^ skey)
    x = mix64(x + eb)
    x = mix64(x ^ rkey)
    return (x >> 11) * INV_2_53
