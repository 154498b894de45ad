from deltaspec.setup import *
from deltaspec.errors import *
from deltaspec.specialfn import *
from deltaspec.manifold import *
from deltaspec.registry import *
from deltaspec.reports import *
from deltaspec.pointinteraction import *
from deltaspec.relativistic import *
from deltaspec.leemodel import *
from deltaspec.verification import *
from deltaspec.configuration import *
from deltaspec.runner import *
from deltaspec.tasks import *

__version__ = '1.0.0'
