package com.example.notes;

public class NotesActivity {
    public void onCreate(Bundle b) {
        setContentView(R.layout.main);
    }
}
