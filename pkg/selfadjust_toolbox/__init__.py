from .config import *
from .errors import *
from .rsp import *
from .readerset import *
from .forkjoin import *
from .engine import *
from .metrics import *
from .apps import *
from .contraction import *
from .bst import *
import logging
"""The Self-Adjusting Toolbox: parallel self-adjusting computation in Python.

`import selfadjust_toolbox as sat` keeps the primitives, the oracles and the
benchmark applications inside the `sat` namespace.

`import selfadjust_toolbox.engine as engine` keeps the primitives in the
`engine` namespace.
"""

__title__ = 'selfadjust_toolbox'
# version may have no more then numerical digits after decimal point.
__version__ = '0.1.0'
__author__ = u'Self-Adjusting Toolbox developers'
__license__ = 'MIT'
__copyright__ = 'Copyright 2026 Self-Adjusting Toolbox developers'
__all__ = ['config', 'errors', 'rsp', 'readerset', 'forkjoin', 'engine',
           'metrics', 'apps', 'contraction', 'bst', '__version__']

logging.getLogger(__name__).addHandler(logging.NullHandler())
