"""Invocations whose reports are committed under tests/golden/."""

CASES = {
    "oscillator-check": ["check", "oscillator"],
    "oscillator-field-equations": ["field-equations", "oscillator", "--section", "exact"],
    "oscillator-nonsolution": ["field-equations", "oscillator", "--section", "nonsolution", "--solve-at", "t=0,q=1,p=0"],
    "oscillator-noether-time": ["noether", "oscillator", "--symmetry", "time", "--verify-with", "hamiltonian"],
    "oscillator-noether-dilation": ["noether", "oscillator", "--symmetry", "dilation", "--order-max", "3"],
    "oscillator-rotation-map": ["symmetry", "oscillator", "--map", "rotation"],
    "oscillator-energy": ["conserved", "oscillator", "--quantity", "energy", "--verify-with", "hamiltonian", "--section", "exact"],
    "oscillator-action": ["action", "oscillator", "--section", "exact", "--box", "0:2*pi", "--points", "64"],
    "free-particle-check": ["check", "free-particle"],
    "free-particle-field-equations": ["field-equations", "free-particle", "--section", "straight"],
    "free-particle-noether-translation": ["noether", "free-particle", "--symmetry", "translation", "--verify-with", "newton"],
    "free-particle-noether-boost": ["noether", "free-particle", "--symmetry", "boost", "--verify-with", "newton"],
    "free-particle-boost-map": ["symmetry", "free-particle", "--map", "boost"],
    "ddw-wave-check": ["check", "ddw-wave"],
    "ddw-wave-field-equations": ["field-equations", "ddw-wave", "--section", "wave"],
    "ddw-wave-noether-time": ["noether", "ddw-wave", "--symmetry", "time", "--verify-with", "free", "coupled"],
    "ddw-wave-energy-flux": [
        "conserved", "ddw-wave", "--quantity", "energy", "--verify-with", "free", "coupled",
        "--section", "wave", "--box", "0:1", "0:1", "--points", "32",
    ],
    "premulti-degenerate-check": ["check", "premulti-degenerate"],
    "premulti-degenerate-field-equations": ["field-equations", "premulti-degenerate", "--section", "exact"],
    "premulti-degenerate-noether-gauge": [
        "noether", "premulti-degenerate", "--symmetry", "gauge", "--verify-with", "hamiltonian", "drifting",
    ],
    "identities": ["identities", "--cases", "20"],
}
