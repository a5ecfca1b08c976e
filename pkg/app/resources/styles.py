# Colors
VALIDITY_COLORS = {
    'total': '#f3d6ba',
    'valid': '#90c3d4',
}

TEXT_COLOR = "#000000"

# Chart
CHART_FONT_SIZE = 10
SVG_HASH_SALT = "parcelfuse"
