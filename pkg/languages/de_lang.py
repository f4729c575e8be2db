#!/usr/bin/env python3

"""German language strings"""

LANG_STRINGS = {
    'argparse': {
        'description': 'Mehrkanalige Sprecherdiarisierung mit räumlichen Merkmalen und Überlappungserkennung',
        'config': 'Konfigurationsdatei, die config.json überlagert (.json oder [Abschnitt] schlüssel = wert)',
        'seed': 'Startwert für Clustering, Simulation und Training',
        'out': 'Ausgabedatei oder -verzeichnis',
        'debug': 'Debug-Ausgabe aktivieren',
        'app_lang': 'Sprache der Anwendung (z.B. en, de)',
        'design': 'Superdirektive Beamformer-Bank entwerfen und in eine Datei schreiben',
        'directions': 'Anzahl der Blickrichtungen',
        'taps': 'FIR-Länge pro Kanal',
        'simulate': 'Simuliertes Meeting erzeugen (WAV, Referenz-RTTM, Überlappungs-RTTM)',
        'script': 'Meeting-Skript; ohne Angabe wird ein zufälliges Meeting erzeugt',
        'speakers': 'Anzahl der Sprecher eines zufälligen Meetings',
        'duration': 'Dauer eines zufälligen Meetings in Sekunden',
        'overlap': 'Überlappungsanteil eines zufälligen Meetings',
        'snr': 'Signal-Rausch-Verhältnis in dB',
        'svector': 'S-Vektoren aus einer Mehrkanalaufnahme extrahieren',
        'wav': 'Mehrkanalige WAV-Aufnahme',
        'bank': 'Beamformer-Bank, erzeugt mit design',
        'osd_train': 'Überlappungsdetektor auf simulierten Meetings trainieren',
        'variant': 'Detektorvariante M1, M2, M3 oder M4',
        'meetings': 'Anzahl simulierter Trainingsmeetings',
        'epochs': 'Anzahl der Trainingsepochen',
        'osd_detect': 'Überlappende Sprache in einer Aufnahme erkennen',
        'model': 'Detektor-Checkpoint',
        'reference': 'Referenz-RTTM',
        'diarize': 'Aufnahme diarisieren',
        'vad': 'Sprachbereiche (RTTM oder Zeilen "start ende")',
        'embeddings': 'Sprecher-Embedding-Datei (Zeilen "start ende v_1 ... v_D")',
        'embedding_kind': 'Ähnlichkeit für das Clustering: fusioniert (sx), Sprecher-Embedding (x) oder S-Vektor (s)',
        'osd': 'Detektor-Checkpoint; aktiviert die Zuordnung zweiter Sprecher',
        'oracle_osd': 'Überlappungsbereiche aus dieser Referenz-RTTM übernehmen',
        'score_der': 'Hypothesen-RTTM gegen eine Referenz bewerten (DER)',
        'hypothesis': 'Hypothesen-RTTM',
        'hypothesis_overlap': 'RTTM der erkannten Überlappungen',
        'collar': 'Toleranzbereich in Sekunden um Referenzgrenzen',
        'ignore_overlap': 'Überlappende Referenzbereiche von der Bewertung ausschließen',
        'score_osd': 'Erkannte Überlappung gegen eine Referenz bewerten (DetER)',
    },
    'info': {
        'bank_written': 'Beamformer-Bank ({} Richtungen, {} Kanäle, {} Koeffizienten) geschrieben nach {}',
        'simulated': 'Simuliertes Meeting mit {} Sprechern, {:.1f} s, geschrieben nach {}',
        'svectors_written': '{} S-Vektoren geschrieben nach {}',
        'building_dataset': 'Simuliere {} Trainingsmeetings',
        'dataset': 'Trainingsmenge: {} Abschnitte, {:.0%} mit Überlappung',
        'model_written': 'Detektor {} trainiert (letzter Verlust {:.4f}), geschrieben nach {}',
        'overlap_written': '{} Überlappungsbereiche ({:.2f} s) geschrieben nach {}',
        'diarized': '{} Sprecher in {} Fenstern gefunden, {:.2f} s Überlappung ({})',
        'rttm_written': 'RTTM geschrieben',
        'report_written': 'Laufbericht geschrieben',
    },
    'debug': {
        'enabled': 'Debug-Modus aktiviert',
    },
    'errors': {
        'file_not_found': 'Datei nicht gefunden: {}',
        'data': 'Fehler: {}',
        'no_model': 'Kein Detektor-Checkpoint angegeben (--model oder osd.model in der Konfiguration)',
        'interrupted': 'Vorgang vom Benutzer abgebrochen',
    },
}
