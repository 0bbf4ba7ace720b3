"""popaudit-figures: render popaudit CSV reports into figure files."""

from .render import RenderResult, render_all
from .specs import FIGURE_SPECS

__version__ = "0.1.0"
