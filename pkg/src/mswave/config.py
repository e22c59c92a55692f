"""Flat key-value experiment configs: `section.key = value`, # comments.

Values stay strings until a typed getter coerces them; fractions like 1/8
are accepted wherever floats are, which keeps sweep lists readable.
"""

import hashlib


class ConfigError(Exception):
    pass


def _to_float(s):
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


class Config:
    def __init__(self, entries, source="<config>"):
        self.entries = dict(entries)
        self.source = source

    @classmethod
    def from_text(cls, text, source="<text>"):
        entries = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected 'key = value', got %r"
                                  % (source, lineno, raw.strip()))
            key, val = line.split("=", 1)
            key = key.strip()
            if not key or "." not in key:
                raise ConfigError("%s:%d: keys look like 'section.name'"
                                  % (source, lineno))
            entries[key] = val.strip()
        return cls(entries, source)

    @classmethod
    def from_file(cls, path):
        with open(path) as f:
            return cls.from_text(f.read(), source=str(path))

    def has(self, key):
        return key in self.entries

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def require(self, key):
        if key not in self.entries:
            raise ConfigError("%s: missing required key %r" % (self.source, key))
        return self.entries[key]

    def get_str(self, key, default=None):
        v = self.get(key, default)
        if v is None:
            raise ConfigError("%s: missing key %r" % (self.source, key))
        return v

    def get_int(self, key, default=None):
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError("%s: missing key %r" % (self.source, key))
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError("%s: key %r wants an integer, got %r"
                              % (self.source, key, v))

    def get_float(self, key, default=None):
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError("%s: missing key %r" % (self.source, key))
            return float(default)
        try:
            return _to_float(v)
        except (ValueError, ZeroDivisionError):
            raise ConfigError("%s: key %r wants a number, got %r"
                              % (self.source, key, v))

    def get_bool(self, key, default=None):
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError("%s: missing key %r" % (self.source, key))
            return bool(default)
        low = v.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError("%s: key %r wants true/false, got %r"
                          % (self.source, key, v))

    def get_floats(self, key, default=()):
        v = self.get(key)
        if v is None:
            return list(default)
        try:
            return [_to_float(p) for p in v.split(",") if p.strip()]
        except (ValueError, ZeroDivisionError):
            raise ConfigError("%s: key %r wants comma-separated numbers, got %r"
                              % (self.source, key, v))

    def section(self, prefix):
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.entries.items()
                if k.startswith(p)}

    def canonical(self, prefixes=None):
        """Sorted `key = value` text of the selected sections, for hashing."""
        keys = sorted(k for k in self.entries
                      if prefixes is None
                      or any(k.startswith(p + ".") for p in prefixes))
        return "\n".join("%s = %s" % (k, self.entries[k]) for k in keys)

    def content_hash(self, prefixes=None):
        return hashlib.sha256(self.canonical(prefixes).encode()).hexdigest()[:16]


# every key the runner understands, with a short note; validation rejects
# anything else so config typos fail before any solve starts
KNOWN_KEYS = {
    "problem.dim": "1 or 2",
    "problem.eps": "microscale, number or fraction",
    "problem.coeff": "coefficient kind",
    "problem.coeff_params": "comma-separated parameters",
    "problem.bc": "periodic | dirichlet",
    "problem.g1": "initial displacement profile name",
    "problem.g2": "initial velocity profile name",
    "problem.F": "forcing profile name",
    "problem.seed": "rng seed for randomized checks",
    "time.T": "final time",
    "time.dt": "time step (0 = auto CFL)",
    "time.scheme": "leapfrog | newmark",
    "time.n_checkpoints": "stored snapshots",
    "mesh.N": "macro / method resolution",
    "mesh.N_fine": "fine resolution (lod, references)",
    "method.name": "fine | homogenized | boussinesq | fehmm | fehmm_l | fdhmm | lod",
    "sweep.H": "coarse sizes, e.g. 1/8, 1/16",
    "sweep.eps": "microscale sweep",
    "reference.kind": "fine | homogenized | boussinesq | none",
    "reference.N": "reference resolution",
    "reference.dt": "reference time step",
    "fehmm.delta_over_eps": "sampling domain size / eps",
    "fehmm.n_micro": "micro elements per sampling domain",
    "fehmm.coupling": "periodic | dirichlet",
    "fehmm.longtime": "true enables the corrected mass",
    "fdhmm.tau_over_eps": "kernel window / eps",
    "fdhmm.delta_over_eps": "sampling domain size / eps",
    "fdhmm.n_micro": "micro cells per sampling domain",
    "lod.k": "localization radius (0 = auto)",
    "lod.init_mode": "zero | l2_proj | wellprepared",
    "homog.n_cell": "cell problem resolution",
    "homog.n_sample_points": "slow-variable samples for homogenize",
    "longtime.T0": "horizon is T0 / eps^2",
    "longtime.checkpoints": "comparison times",
    "longtime.methods": "extra trajectories: fehmm, fehmm_l",
    "budget.max_work": "refuse runs above dofs*steps (0 = off)",
    "output.csv": "table path",
    "output.snapshot": "trajectory path for solve",
    "output.figures": "render png next to the csv",
    "output.walltime": "false blanks wall_time_s for reproducible bytes",
}


def validate_keys(cfg):
    unknown = [k for k in cfg.entries if k not in KNOWN_KEYS]
    if unknown:
        raise ConfigError("%s: unknown key(s): %s"
                          % (cfg.source, ", ".join(sorted(unknown))))


CHOICE_KEYS = {
    "problem.bc": ("periodic", "dirichlet"),
    "time.scheme": ("leapfrog", "newmark"),
    "method.name": ("fine", "homogenized", "boussinesq", "fehmm", "fehmm_l",
                    "fdhmm", "lod"),
    "reference.kind": ("fine", "homogenized", "boussinesq", "none"),
    "fehmm.coupling": ("periodic", "dirichlet"),
    "lod.init_mode": ("zero", "l2_proj", "wellprepared"),
}


def validate_choices(cfg):
    for key, allowed in CHOICE_KEYS.items():
        v = cfg.get(key)
        if v is not None and v not in allowed:
            raise ConfigError("%s: key %r must be one of %s, got %r"
                              % (cfg.source, key, "/".join(allowed), v))
