"""Process-wide parameters of the toolbox.

`rcParams` plays the part ``matplotlib.rcParams`` plays for plotting: one
validated mapping that every module consults at call time.

>>> import selfadjust_toolbox as sat
>>> sat.rcParams['engine.workers']
1
>>> with sat.rc_context(**{'engine.workers': 4}):
...     sat.rcParams['engine.workers']
4
>>> sat.rcParams['engine.workers']
1
"""

import contextlib

__all__ = ['rcParams', 'rc_context', 'rcdefaults']


def _positive_int(value):
    value = int(value)
    if value < 1:
        raise ValueError('expected a positive integer, got {}'.format(value))
    return value


def _flag(value):
    if isinstance(value, str):
        if value.lower() in ('1', 'true', 'yes', 'on'):
            return True
        if value.lower() in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError('cannot interpret {!r} as a flag'.format(value))
    return bool(value)


def _prime_modulus(value):
    value = int(value)
    if value < 3:
        raise ValueError('hash modulus must exceed 2')
    return value


_validators = {
    'engine.workers': _positive_int,
    'engine.instrument': _flag,
    'engine.debug': _flag,
    'engine.recursion_limit': _positive_int,
    'engine.stack_size': _positive_int,
    'engine.fork_threshold': _positive_int,
    'readerset.defer': _flag,
    'readerset.unlink_on_traverse': _flag,
    'apps.hash_base': _positive_int,
    'apps.hash_prime': _prime_modulus,
}

_defaults = {
    'engine.workers': 1,
    'engine.instrument': False,
    'engine.debug': False,
    'engine.recursion_limit': 20000,
    'engine.stack_size': 64 * 2**20,
    'engine.fork_threshold': 1024,
    'readerset.defer': False,
    'readerset.unlink_on_traverse': False,
    'apps.hash_base': 256,
    'apps.hash_prime': 2**61 - 1,
}


class RcParams(dict):
    """Dictionary of toolbox parameters with key and value validation.

    Unknown keys raise `KeyError`; values are normalized by the validator
    registered for their key and raise `ValueError` when rejected.
    """

    def __init__(self, *args, **kwargs):
        super().__init__()
        self.update(*args, **kwargs)

    def __setitem__(self, key, value):
        try:
            validate = _validators[key]
        except KeyError:
            raise KeyError('{!r} is not a valid rc parameter; see '
                           'rcParams.keys() for a list'.format(key))
        super().__setitem__(key, validate(value))

    def __getitem__(self, key):
        try:
            return super().__getitem__(key)
        except KeyError:
            raise KeyError('{!r} is not a valid rc parameter'.format(key))

    def update(self, *args, **kwargs):
        for key, value in dict(*args, **kwargs).items():
            self[key] = value

    def copy(self):
        return RcParams(self)


rcParams = RcParams(_defaults)


def rcdefaults():
    """Restore every parameter to its default value."""
    rcParams.update(_defaults)


@contextlib.contextmanager
def rc_context(**overrides):
    """Temporarily override parameters, restoring them on exit.

    Parameters
    ----------
    **overrides
        Parameter values keyed by name. Dotted names need the
        ``**{'engine.workers': 4}`` spelling.
    """
    saved = dict(rcParams)
    try:
        rcParams.update(overrides)
        yield rcParams
    finally:
        dict.clear(rcParams)
        dict.update(rcParams, saved)
