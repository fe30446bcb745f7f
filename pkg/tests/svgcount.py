"""Count plot elements in a rendered SVG by their element ids."""

import re
import xml.etree.ElementTree as ET


def element_ids(path) -> list[str]:
    root = ET.parse(path).getroot()
    return [el.get("id") for el in root.iter() if el.get("id")]


def count(path, prefix: str) -> int:
    pat = re.compile(rf"^{re.escape(prefix)}-\d{{4}}$")
    return sum(1 for i in element_ids(path) if pat.match(i))
