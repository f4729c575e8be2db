#!/usr/bin/env python3

"""User facing strings of the command line tools, one module per language"""

import glob
import importlib
import os
from typing import Any, Dict, List, Optional

from utils import debug_print

DEFAULT_LANGUAGE = 'en'


def get_supported_languages() -> List[str]:
    """Language codes with a `<code>_lang.py` module next to this file"""
    current_dir = os.path.dirname(os.path.abspath(__file__))
    lang_files = glob.glob(os.path.join(current_dir, '*_lang.py'))
    return sorted(os.path.basename(f)[:-len('_lang.py')] for f in lang_files)


SUPPORTED_LANGUAGES = get_supported_languages()


def _lookup(strings: Dict[str, Any], keys) -> Optional[str]:
    current = strings
    for key in keys:
        if not isinstance(current, dict) or key not in current:
            return None
        current = current[key]
    return current if isinstance(current, str) else None


class LanguageStrings:
    """Nested string table with a per-key fallback table (English for every other language)"""

    def __init__(self, strings: Dict[str, Any], name: str = DEFAULT_LANGUAGE,
                 fallback: Optional['LanguageStrings'] = None):
        self._strings = strings
        self.name = name
        self.fallback = fallback

    def get(self, *keys: str) -> str:
        """
        Translated text for a key path such as ('errors', 'data').

        Missing keys are looked up in the fallback table; when that fails too the dotted
        key path is returned so a gap in a translation is visible but never fatal.
        """
        text = _lookup(self._strings, keys)
        if text is not None:
            return text
        if self.fallback is not None:
            return self.fallback.get(*keys)
        debug_print(f"Missing string {'.'.join(keys)} in language '{self.name}'", component='main')
        return '.'.join(keys)


def _import_strings(lang_code: str) -> Dict[str, Any]:
    module = importlib.import_module(f'languages.{lang_code}_lang')
    return module.LANG_STRINGS


def load_language(lang_code: Optional[str]) -> LanguageStrings:
    """
    Load the strings of a language, falling back to English for unknown codes.

    Raises ImportError only when the English module itself is missing.
    """
    lang_code = (lang_code or DEFAULT_LANGUAGE).lower()
    if lang_code not in SUPPORTED_LANGUAGES:
        debug_print(f"Language '{lang_code}' not supported, falling back to {DEFAULT_LANGUAGE}", component='main')
        lang_code = DEFAULT_LANGUAGE

    try:
        default = LanguageStrings(_import_strings(DEFAULT_LANGUAGE), name=DEFAULT_LANGUAGE)
    except ImportError:
        raise ImportError(f"Default language module {DEFAULT_LANGUAGE} not found!")
    if lang_code == DEFAULT_LANGUAGE:
        return default

    try:
        return LanguageStrings(_import_strings(lang_code), name=lang_code, fallback=default)
    except ImportError:
        debug_print(f"Language module {lang_code} not found", component='main')
        return default
